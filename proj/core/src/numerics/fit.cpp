#include "mupscope/numerics/fit.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mupscope::numerics {

PowerLawFit loglog_linfit(std::span<const double> ts, std::span<const double> ys) {
  if (ts.size() != ys.size())
    throw std::invalid_argument("loglog_linfit: length mismatch (" + std::to_string(ts.size()) +
                                " vs " + std::to_string(ys.size()) + ")");
  const std::size_t n = ts.size();
  if (n < 2) throw std::invalid_argument("loglog_linfit: need at least 2 points");

  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ts[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(ts[i]) || !std::isfinite(ys[i]))
      throw std::invalid_argument("loglog_linfit: entries must be finite and strictly positive");
    lx[i] = std::log(ts[i]);
    ly[i] = std::log(ys[i]);
  }

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = lx[i] - mx;
    const double dy = ly[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) throw std::invalid_argument("loglog_linfit: abscissae are all equal");

  PowerLawFit fit;
  fit.beta = sxy / sxx;
  fit.a = std::exp(my - fit.beta * mx);

  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (my + fit.beta * (lx[i] - mx));
    ss_res += r * r;
  }
  // Relative cutoff: a target that is constant up to rounding has r2 = 1.
  fit.r2 = syy <= 1e-24 * static_cast<double>(n) ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

}  // namespace mupscope::numerics
