#include <iostream>
#include <string>
#include <vector>

#include "mslab/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mslab::run_cli(args, std::cout, std::cerr);
}
