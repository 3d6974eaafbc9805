#include "catgen/cli.hpp"

int main(int argc, char** argv) { return catgen::run(argc, argv); }
