#include "osciguard/cli/cli.hpp"

int main(int argc, char** argv) { return osciguard::cli::cli_main(argc, argv); }
