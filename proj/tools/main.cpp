#include "cli.hpp"

int main(int argc, char** argv) { return ckada::cli::run(argc, argv); }
