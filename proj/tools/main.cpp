#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return rpf::cli::run(argc, argv, std::cout, std::cerr); }
