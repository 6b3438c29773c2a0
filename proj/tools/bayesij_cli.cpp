#include "bayesij/cli.hpp"

int main(int argc, char** argv) { return bayesij::cli_main(argc, argv); }
