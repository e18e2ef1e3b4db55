#include <iostream>

#include "icnr/cli.hpp"

int main(int argc, char** argv) { return icnr::cli::run(argc, argv, std::cout, std::cerr); }
