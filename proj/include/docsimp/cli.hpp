#pragma once

#include <string>
#include <vector>

namespace docsimp {

// Runs one toolkit command; args exclude the program name. Every run that
// writes outputs also writes a manifest (command, args, seed, output
// checksums) beside them, and `rerun --manifest <file>` re-executes the
// recorded command and verifies the outputs come out byte-identical.
//
// Exit codes: 0 success, 2 usage error, 3 invalid input or failed
// validation, 4 internal/runtime failure. Errors print one
// "error: <message>" line on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace docsimp
