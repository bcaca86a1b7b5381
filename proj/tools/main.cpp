#include <string>
#include <vector>

#include "memscrape/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return memscrape::cli::run(std::move(args));
}
