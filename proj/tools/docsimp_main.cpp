#include <string>
#include <vector>

#include "docsimp/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return docsimp::run_cli(args);
}
