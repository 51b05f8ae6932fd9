#include <iostream>

#include "uwash/commands.hpp"

int main(int argc, char** argv) {
  return uwash::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
