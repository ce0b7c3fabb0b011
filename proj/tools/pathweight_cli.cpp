#include "pathweight/cli.hpp"

int main(int argc, char** argv) { return pathweight::cli::cli_main(argc, argv); }
