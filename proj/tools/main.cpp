#include "cli.hpp"

int main(int argc, char** argv) { return fruitmap::cli::run(argc, argv); }
