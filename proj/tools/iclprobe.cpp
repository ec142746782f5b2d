#include "iclprobe/cli/cli.hpp"

int main(int argc, char** argv) { return iclprobe::cli::run_cli(argc, argv, std::cout, std::cerr); }
