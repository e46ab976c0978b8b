#include <iostream>

#include "evpulse/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return evpulse::cli::run(args, std::cout, std::cerr);
}
