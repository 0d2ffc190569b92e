#include <iostream>

#include "crs/app/cli.hpp"

int main(int argc, char** argv) { return crs::app::run_cli(argc, argv, std::cout, std::cerr); }
