#include "mmot/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mmot::cli::main(argc, argv, std::cout, std::cerr); }
