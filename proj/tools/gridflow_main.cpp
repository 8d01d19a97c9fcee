#include "gridflow/cli.hpp"

int main(int argc, char** argv) { return gridflow::run_cli(argc, argv); }
