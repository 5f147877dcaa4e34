#include "gridop/cli.hpp"

int main(int argc, char** argv) { return gridop::run_cli(argc, argv); }
