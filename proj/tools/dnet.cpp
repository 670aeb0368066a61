#include <iostream>
#include <string>
#include <vector>

#include "disordernet/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return dnet::cli::run(args, std::cout, std::cerr);
}
