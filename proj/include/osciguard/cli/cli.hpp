#pragma once

namespace osciguard::cli {

/// Full command-line entry point; maps errors to the documented exit codes
/// (0 ok, 1 usage, 2 data fault, 3 simulation/training fault).
int cli_main(int argc, char** argv);

}  // namespace osciguard::cli
