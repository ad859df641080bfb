#pragma once

#include <stdexcept>
#include <string>

namespace docsimp {

// Input data failed a documented invariant (corpus schema, config bounds,
// strategy combinations). CLI maps this to exit code 3.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Command-line usage problems. CLI maps this to exit code 2.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace docsimp
