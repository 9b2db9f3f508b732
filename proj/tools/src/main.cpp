#include <iostream>

#include "infoproj/cli/cli.hpp"

int main(int argc, char** argv) {
    return infoproj::cli::run(argc, argv, std::cout, std::cerr);
}
