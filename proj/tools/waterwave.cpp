#include <iostream>

#include "waterwave/cli.hpp"

int main(int argc, char** argv) {
  return waterwave::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
