#include <iostream>
#include <string>
#include <vector>

#include "symvi/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return symvi::run_cli(args, std::cout, std::cerr);
}
