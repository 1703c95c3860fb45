#include "trihedge/cli.hpp"

int main(int argc, char** argv) { return trihedge::cli::run_cli(argc, argv); }
