#include <iostream>
#include <string>
#include <vector>

#include "seqembed/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return seqembed::cli_main(args, std::cout, std::cerr);
}
