#include <iostream>

#include "squeezesim/cli.hpp"

int main(int argc, char** argv) { return squeeze::cli_dispatch(argc, argv, std::cout, std::cerr); }
