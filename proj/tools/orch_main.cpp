#include <iostream>

#include "orch/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return orch::cli::run(args, std::cout, std::cerr);
}
