#include <iostream>

#include "tgiqa/cli.hpp"

int main(int argc, char** argv) { return tgiqa::cli::run(argc, argv, std::cout, std::cerr); }
