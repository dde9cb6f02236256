#include "salsa/cli.hpp"

int main(int argc, char** argv) { return salsa::cli::run(argc, argv); }
