#include "eapo/cli.hpp"

int main(int argc, char** argv) { return eapo::run_cli(argc, argv); }
