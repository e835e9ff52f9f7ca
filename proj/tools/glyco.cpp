#include <iostream>

#include "glyco/cli.hpp"

int main(int argc, char** argv) { return glyco::run_cli(argc, argv, std::cout, std::cerr); }
