#include <iostream>

#include "mrot/cli.hpp"

int main(int argc, char** argv) { return mrot::run_cli(argc, argv, std::cout, std::cerr); }
