#include <iostream>
#include <vector>

#include "rbdpipe/cli_app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rbdpipe::cli::run(args, std::cout, std::cerr);
}
