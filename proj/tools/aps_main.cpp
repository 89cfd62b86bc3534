#include <vector>

#include "aps/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return aps::cli::run(std::move(args));
}
