#include "dropfam/harness/cli.hpp"

int main(int argc, char** argv) { return dropfam::cli::run(argc, argv); }
