#include "emclim/cli.hpp"

int main(int argc, char** argv) { return emclim::cli::run_argv(argc, argv); }
