#include <iostream>

#include "prism/cli/commands.hpp"

int main(int argc, char** argv) { return prism::cli::run(argc, argv, std::cout, std::cerr); }
