#include <iostream>

#include "dtn/cli.hpp"

int main(int argc, char** argv) { return dtn::cli::run(argc, argv, std::cout, std::cerr); }
