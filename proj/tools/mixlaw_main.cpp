#include <iostream>

#include "mixlaw/cli.hpp"

int main(int argc, char** argv) { return mixlaw::run_cli(argc, argv, std::cout, std::cerr); }
