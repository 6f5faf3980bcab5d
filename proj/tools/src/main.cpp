#include <iostream>

#include "evorep/cli.hpp"

int main(int argc, char** argv) { return evorep::cli::run(argc, argv, std::cout, std::cerr); }
