#include <string>
#include <vector>

#include "mrseq/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mrseq::cli::run(args);
}
