#include <iostream>

#include "geolm/cli.hpp"

int main(int argc, char** argv) { return geolm::cli::run(argc, argv, std::cout, std::cerr); }
