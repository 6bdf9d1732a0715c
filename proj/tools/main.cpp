#include <iostream>

#include "rosprompt/cli.hpp"

int main(int argc, char** argv) {
  return rosprompt::cli::run(argc, argv, std::cout, std::cerr);
}
