#include <iostream>

#include "vjp/cli.hpp"

int main(int argc, char** argv) {
  return vjp::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
