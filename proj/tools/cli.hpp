#pragma once

namespace gradguide {

/// Parses argv and dispatches to run/ablate/plot. Returns the process
/// exit code: 0 success, 2 invalid usage or configuration, 1 runtime
/// failure.
int run_cli(int argc, const char* const* argv);

}  // namespace gradguide
