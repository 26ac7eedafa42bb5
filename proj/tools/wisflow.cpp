#include <iostream>

#include "wisflow/cli.hpp"

int main(int argc, char** argv) { return wisflow::run_cli(argc, argv, std::cout, std::cerr); }
