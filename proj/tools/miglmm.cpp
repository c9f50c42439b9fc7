#include <iostream>
#include <string>
#include <vector>

#include "miglmm/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return miglmm::run_cli(args, std::cout, std::cerr);
}
