#include "corabench/cli.hpp"

int main(int argc, char** argv) { return corabench::cli_main(argc, argv); }
