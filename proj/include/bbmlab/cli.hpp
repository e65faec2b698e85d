#pragma once

namespace bbmlab {

/// argv-style entry point for the bbmlab tool.  argv[0] is the program name;
/// the remaining words select a subcommand (space build, check doubling |
/// strong-doubling | poincare, mollifier audit, energy estimate, run, golden
/// record | compare).  Returns the process exit code: 0 on success, 1 on a
/// usage or validation error, 2 on a golden-record mismatch.  Reports go to
/// standard output as JSON; diagnostics go to standard error as one JSON
/// object per failure.
int run_command(int argc, const char* const* argv);

}  // namespace bbmlab
