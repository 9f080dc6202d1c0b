#include "repmtl/cli.hpp"

int main(int argc, char** argv) { return repmtl::cli::run(argc, argv); }
