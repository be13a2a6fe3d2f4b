#include "netgraph/cli.hpp"

int main(int argc, char** argv) { return netgraph::cli::run_cli(argc, argv); }
