#include <iostream>

#include "gce/cli.hpp"

int main(int argc, char** argv) { return gce::run_cli(argc, argv, std::cout, std::cerr); }
