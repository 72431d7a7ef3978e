#include <iostream>
#include <string>
#include <vector>

#include "cfx/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cfx::cli::run(args, std::cout, std::cerr);
}
