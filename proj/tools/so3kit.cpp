#include <so3kit/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return so3kit::cli::run(argc, argv, std::cin, std::cout, std::cerr); }
