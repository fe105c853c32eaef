#include "hallucigrid/cli.hpp"

int main(int argc, char** argv) { return hg::run_cli(argc, argv); }
