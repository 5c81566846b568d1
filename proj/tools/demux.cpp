#include "demux/cli.hpp"

int main(int argc, char** argv) { return demux::cli::run(argc, argv); }
