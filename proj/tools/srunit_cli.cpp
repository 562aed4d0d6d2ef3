#include "srunit/cli/commands.hpp"

int main(int argc, char** argv) { return srunit::run_cli(argc, argv); }
