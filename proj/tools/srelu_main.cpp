#include <string>
#include <vector>

#include "srelu/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return srelu::run_cli(args);
}
