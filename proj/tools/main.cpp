#include <iostream>

#include "modelmap_cli/app.hpp"

int main(int argc, char** argv) { return modelmap::cli::run_cli(argc, argv, std::cout, std::cerr); }
