#include <iostream>

#include "opgan/cli.hpp"

int main(int argc, char** argv) { return opgan::cli::cli_main(argc, argv, std::cout, std::cerr); }
