#include "sddekit/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sddekit::cli::run(argc, argv, std::cout, std::cerr); }
