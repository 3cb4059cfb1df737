#include "dsfacto/cli.hpp"

int main(int argc, char** argv) { return dsfacto::cli::run(argc, argv); }
