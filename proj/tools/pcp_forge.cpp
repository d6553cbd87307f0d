#include "pcpforge/cli.hpp"

int main(int argc, char** argv) { return pcpforge::run_cli(argc, argv); }
