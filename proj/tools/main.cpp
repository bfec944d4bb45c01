#include "pplcheck_cli.hpp"

int main(int argc, char** argv) { return pplcheck::cli::run(argc, argv); }
