#include "flowdse/cli.hpp"

int main(int argc, char** argv) { return flowdse::run_cli(argc, argv); }
