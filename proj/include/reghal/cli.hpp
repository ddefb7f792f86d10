#pragma once

namespace reghal {

/// CLI entry point. Exit codes: 0 success, 2 usage error, 3 estimation
/// failure.
int run_cli(int argc, const char* const* argv);

}  // namespace reghal
