#include <iostream>

#include "mgsim/cli.hpp"

int main(int argc, char** argv) { return mgsim::run_cli(argc, argv, std::cout, std::cerr); }
