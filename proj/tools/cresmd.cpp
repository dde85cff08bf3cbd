#include <iostream>

#include "cresmd/cli.hpp"

int main(int argc, char** argv) { return cresmd::run_cli(argc, argv, std::cout, std::cerr); }
