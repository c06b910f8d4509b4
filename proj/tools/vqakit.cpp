#include <iostream>

#include "vqakit/cli.hpp"

int main(int argc, char** argv) {
  return vqakit::cli::run(argc, argv, std::cout, std::cerr);
}
