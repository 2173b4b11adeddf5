#include <iostream>

#include "rna/cli.hpp"

int main(int argc, char** argv) { return rna::cli::run_cli(argc, argv, std::cout, std::cerr); }
