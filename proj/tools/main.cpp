#include "coaltree/cli.hpp"

int main(int argc, char** argv) { return coaltree::run_cli(argc, argv); }
