#include <iostream>

#include "psopdf/cli.hpp"

int main(int argc, char** argv) { return psopdf::cli::run_cli(argc, argv, std::cout, std::cerr); }
