#include <iostream>

#include "rcml/cli.hpp"

int main(int argc, char** argv) { return rcml::run_cli(argc, argv, std::cout, std::cerr); }
