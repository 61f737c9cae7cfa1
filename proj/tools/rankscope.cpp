#include <string>
#include <vector>

#include "rankscope/cli.hpp"

int main(int argc, char** argv) {
  return rankscope::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
