#include "bbmlab/cli.hpp"

int main(int argc, char** argv) { return bbmlab::run_command(argc, argv); }
