#pragma once

#include <iosfwd>

namespace kscope {

/// Exit codes of the command-line frontend.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitReject = 2;
inline constexpr int kExitVerdictFailure = 3;

/// Entry point of the `kscope` tool. Subcommands: simulate, kfun, gof,
/// twosample, mc. Artifacts without an --out path go to `out`; diagnostics go
/// to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kscope
