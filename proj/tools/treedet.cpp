#include "treedet/cli.hpp"

int main(int argc, char** argv) { return treedet::cli::main(argc, argv); }
