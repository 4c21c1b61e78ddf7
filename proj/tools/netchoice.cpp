#include <iostream>

#include "netchoice/cli.hpp"

int main(int argc, char** argv) { return netchoice::cli::main(argc, argv, std::cout, std::cerr); }
