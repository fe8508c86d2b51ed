#include <iostream>

#include "magictrap/cli.hpp"

int main(int argc, char** argv) { return magictrap::cli::run(argc, argv, std::cout, std::cerr); }
