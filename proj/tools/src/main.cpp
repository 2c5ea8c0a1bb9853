#include <iostream>

#include "deepscene/tools/cli.hpp"

int main(int argc, char** argv) { return deepscene::tools::run_cli(argc, argv, std::cout, std::cerr); }
