#include "subens/cli.hpp"

int main(int argc, char** argv) { return subens::cli::run(argc, argv); }
