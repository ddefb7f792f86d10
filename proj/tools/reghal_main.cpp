#include "reghal/cli.hpp"

int main(int argc, char** argv) { return reghal::run_cli(argc, argv); }
