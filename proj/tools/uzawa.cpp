#include <iostream>

#include "uzawa/cli.hpp"

int main(int argc, char** argv) { return uzawa::cli::run(argc, argv, std::cout, std::cerr); }
