#pragma once

#include <iosfwd>

namespace mupscope::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

/// Entry point shared by the executable and the tests.
///
///   latent simulate | latent verify | train | sweep |
///   analyze consistency | analyze transfer | version
///
/// Flags: --config, --out, --seed, --jobs (MUPSCOPE_JOBS), --force.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mupscope::cli
