#include <iostream>

#include "drssl/cli/cli.hpp"

int main(int argc, char** argv) { return drssl::cli::run(argc, argv, std::cout, std::cerr); }
