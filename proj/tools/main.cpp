#include <string>
#include <vector>

#include "mmgnn/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mmgnn::cli::run(args);
}
