#include "mcn/cli.hpp"

int main(int argc, char** argv) { return mcn::cli::run(argc, argv); }
