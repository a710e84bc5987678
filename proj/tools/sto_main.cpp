#include <iostream>

#include "sto/cli.hpp"

int main(int argc, char** argv) { return sto::cli::run(argc, argv, std::cout, std::cerr); }
