#include "latentdyad/cli.hpp"

int main(int argc, char** argv) { return latentdyad::cli_main(argc, argv); }
