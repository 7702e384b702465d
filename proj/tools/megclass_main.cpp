#include "megclass/cli.hpp"

int main(int argc, char** argv) { return megclass::cli_main(argc, argv); }
