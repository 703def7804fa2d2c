#include <iostream>

#include "cpml/cli.hpp"

int main(int argc, char** argv) { return cpml::cli::run(argc, argv, std::cout, std::cerr); }
