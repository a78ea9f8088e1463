#include "aksqfi/cli.hpp"

int main(int argc, char** argv) { return aksqfi::cli_main(argc, argv); }
