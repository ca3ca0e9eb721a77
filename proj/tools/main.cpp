#include "lamewave/cli.hpp"

int main(int argc, char** argv) { return lamewave::cli::run(argc, argv); }
