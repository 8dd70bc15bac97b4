#include <iostream>

#include "ocsvdd/cli.hpp"

int main(int argc, char** argv) { return ocsvdd::run_cli(argc, argv, std::cout, std::cerr); }
