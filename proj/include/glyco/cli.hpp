#pragma once

#include <iosfwd>

namespace glyco {

/// Runs the `glyco` command line. Exit codes: 0 success, 1 invalid input or
/// usage, 2 internal failure. Diagnostics go to `err`.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace glyco
