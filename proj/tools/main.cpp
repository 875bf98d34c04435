#include "ctmle/cli.hpp"

int main(int argc, char** argv) { return ctmle::run_cli(argc, argv); }
