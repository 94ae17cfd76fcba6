#include <iostream>

#include "kscope/cli.hpp"

int main(int argc, char** argv) { return kscope::run_cli(argc, argv, std::cout, std::cerr); }
