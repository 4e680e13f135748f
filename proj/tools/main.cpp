#include "wproj/cli.hpp"

int main(int argc, char** argv) { return wproj::cli_run(argc, argv); }
