#include "helab/cli.hpp"

int main(int argc, char** argv) { return helab::cli::main_entry(argc, argv); }
