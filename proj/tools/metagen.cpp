#include <iostream>

#include "metagen/cli.hpp"

int main(int argc, char** argv) { return metagen::run_cli(argc, argv, std::cout, std::cerr); }
