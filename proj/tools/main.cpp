#include "faceerase/cli/cli.hpp"

int main(int argc, char** argv) { return faceerase::cli::run(argc, argv); }
