#include "cli.hpp"

int main(int argc, char** argv) { return gapflow::cli::main_cli(argc, argv); }
