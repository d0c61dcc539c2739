#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mupscope/numerics/rng.hpp"
#include "mupscope/twolayer/twolayer.hpp"

namespace mupscope::twolayer {

double MomentEstimate::mean_z() const {
  return mean_se > 0.0 ? std::abs(mean - target_mean) / mean_se : (mean == target_mean ? 0.0 : std::numeric_limits<double>::infinity());
}

double MomentEstimate::var_z() const {
  return var_se > 0.0 ? std::abs(var - target_var) / var_se : (var == target_var ? 0.0 : std::numeric_limits<double>::infinity());
}

const MomentEstimate& MomentReport::get(std::string_view name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::out_of_range("moment report has no entry '" + std::string(name) + "'");
}

namespace {

MomentEstimate summarize(std::string name, const std::vector<double>& xs, double target_mean,
                         double target_var) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;

  MomentEstimate est;
  est.name = std::move(name);
  est.mean = mean;
  est.var = m2 * n / (n - 1.0);
  est.mean_se = std::sqrt(est.var / n);
  est.var_se = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
  est.target_mean = target_mean;
  est.target_var = target_var;
  return est;
}

}  // namespace

MomentReport init_moment_check(Scheme scheme, Index N, Index D, int trials, std::uint64_t seed,
                               double gamma0) {
  if (trials < 100) throw std::invalid_argument("init_moment_check: trials must be >= 100");
  if (N < 1 || D < 1) throw std::invalid_argument("init_moment_check: N and D must be >= 1");

  std::vector<double> vs, e00, e01, w0;
  vs.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    CaseStudyConfig cfg;
    cfg.D = D;
    cfg.N = N;
    cfg.scheme = scheme;
    cfg.gamma0 = gamma0;
    cfg.seed = numerics::mix_seed(seed, static_cast<std::uint64_t>(t));
    const LatentState s = project_latent(init_two_layer(cfg));
    vs.push_back(s.v);
    e00.push_back(s.e(0, 0));
    if (D >= 2) e01.push_back(s.e(0, 1));
    w0.push_back(s.w[0]);
  }

  const double n = static_cast<double>(N);
  const double d = static_cast<double>(D);
  MomentReport rep;
  rep.scheme = scheme;
  rep.N = N;
  rep.D = D;
  rep.trials = trials;
  if (scheme == Scheme::kSp) {
    rep.entries.push_back(summarize("v", vs, 1.0, 2.0 / n));
    rep.entries.push_back(summarize("e_00", e00, n / d, 2.0 * n / (d * d)));
    if (D >= 2) rep.entries.push_back(summarize("e_01", e01, 0.0, n / (d * d)));
    rep.entries.push_back(summarize("w_0", w0, 0.0, 1.0 / d));
  } else {
    const double gamma = gamma_for(scheme, gamma0, N);
    rep.entries.push_back(summarize("v", vs, 1.0 / d, 2.0 / (n * d * d)));
    rep.entries.push_back(summarize("e_00", e00, 1.0 / d, 2.0 / (n * d * d)));
    if (D >= 2) rep.entries.push_back(summarize("e_01", e01, 0.0, 1.0 / (n * d * d)));
    rep.entries.push_back(summarize("w_0", w0, 0.0, 1.0 / (d * gamma * gamma)));
  }
  return rep;
}

}  // namespace mupscope::twolayer
