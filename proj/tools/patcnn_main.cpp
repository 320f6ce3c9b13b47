#include <iostream>
#include <string>
#include <vector>

#include "patcnn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return patcnn::run_command(args, std::cout, std::cerr);
}
