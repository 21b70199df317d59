#include <iostream>

#include "hdiff/cli.hpp"

int main(int argc, char** argv) { return hdiff::cli::dispatch(argc, argv, std::cout, std::cerr); }
