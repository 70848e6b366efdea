#include "infspec/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return infspec::cli::main(argc, argv, std::cout, std::cerr); }
