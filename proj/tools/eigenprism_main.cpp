#include "eigenprism/cli.hpp"

int main(int argc, char** argv) {
  return eigenprism::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
