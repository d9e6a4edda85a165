#include "mpirisk/cli.hpp"
int main(int argc, char** argv) { return mpirisk::cli::run(argc, argv); }
