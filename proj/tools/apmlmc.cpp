#include "apmlmc/cli.hpp"

int main(int argc, char** argv) { return apmlmc::cli_main(argc, argv); }
