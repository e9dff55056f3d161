#include <vector>

#include "mstlab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mstlab::run_cli(args);
}
