#include "topicrefine/cli.hpp"

int main(int argc, char** argv) {
  return topicrefine::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
