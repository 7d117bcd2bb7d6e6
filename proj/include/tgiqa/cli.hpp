#pragma once

#include <ostream>

#include "tgiqa/error.hpp"

namespace tgiqa::cli {

enum ExitCode : int { kOk = 0, kClaimFailure = 1, kUsage = 2, kIo = 3 };

/// Exit code for a toolkit error: unreadable or malformed input files map to
/// kIo, everything else to kUsage.
int exit_code_for(Errc code);

/// Runs `tgiqa <subcommand> ...`; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tgiqa::cli
