#include "sysid/cli.hpp"

int main(int argc, char** argv) { return sysid::cli::main(argc, argv); }
