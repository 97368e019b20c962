#include "mmfs/cli.hpp"

int main(int argc, char** argv) { return mmfs::cli::run(argc, argv); }
