#include <iostream>
#include <string>
#include <vector>

#include <gwap/cli.hpp>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return gwap::cli::run_cli(args, std::cout, std::cerr);
}
