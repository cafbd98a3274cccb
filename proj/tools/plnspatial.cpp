#include "plnspatial/cli.hpp"

int main(int argc, char** argv) { return plnspatial::run_cli(argc, argv); }
