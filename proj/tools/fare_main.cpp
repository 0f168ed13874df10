#include "fare/cli.hpp"

int main(int argc, char** argv) { return fare::cli_main(argc, argv); }
