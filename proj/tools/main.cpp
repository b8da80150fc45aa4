#include <iostream>

#include "radgan/cli.hpp"

int main(int argc, char** argv) {
  return radgan::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
