#include <iostream>

#include "dice/cli.hpp"

int main(int argc, char** argv) { return dice::cli::run(argc, argv, std::cout, std::cerr); }
