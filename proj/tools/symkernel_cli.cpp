#include "symkernel/cli.hpp"

int main(int argc, char** argv) { return symkernel::cli::run(argc, argv); }
