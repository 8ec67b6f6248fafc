#include "climatune/cli.hpp"

int main(int argc, char** argv) { return climatune::cli_main(argc, argv); }
