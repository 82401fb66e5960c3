#include <iostream>

#include "granular/cli.hpp"

int main(int argc, char** argv) { return granular::cli::run(argc, argv, std::cout, std::cerr); }
