#include "gflm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return gflm::run_cli(argc, argv, std::cout, std::cerr);
}
