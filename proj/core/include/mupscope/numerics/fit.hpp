#pragma once

#include <span>

namespace mupscope::numerics {

/// y = a * t^beta fitted in log-log space.
struct PowerLawFit {
  double a = 0.0;
  double beta = 0.0;
  double r2 = 0.0;
};

/// Least squares fit of log y = log a + beta log t. r2 is 1 for a
/// zero-variance target. Throws std::invalid_argument on nonpositive entries,
/// mismatched lengths or fewer than two points.
PowerLawFit loglog_linfit(std::span<const double> ts, std::span<const double> ys);

}  // namespace mupscope::numerics
