#include "capepde/cli.hpp"

int main(int argc, char** argv) { return capepde::run_cli(argc, argv); }
