#include <string>
#include <vector>

#include "mepi/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mepi::cli::run(args);
}
