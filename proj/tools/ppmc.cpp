#include <iostream>

#include "ppmc/cli.hpp"

int main(int argc, char** argv) { return ppmc::run_cli(argc, argv, std::cout, std::cerr); }
