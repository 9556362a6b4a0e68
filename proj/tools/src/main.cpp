#include <iostream>

#include "coderoute/tools/cli.hpp"

int main(int argc, char** argv) { return coderoute::tools::run_cli(argc, argv, std::cout, std::cerr); }
