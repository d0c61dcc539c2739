#include "mupscope/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace mupscope::analysis {

std::vector<Series> divergence_series(const std::vector<Series>& per_scale) {
  if (per_scale.size() < 2) throw std::invalid_argument("divergence_series: need at least two scales");
  std::size_t proxy = 0;
  for (std::size_t i = 1; i < per_scale.size(); ++i)
    if (per_scale[i].scale > per_scale[proxy].scale) proxy = i;
  const Series& ref = per_scale[proxy];
  if (ref.steps.size() != ref.values.size())
    throw std::invalid_argument("divergence_series: steps and values differ in length");

  std::vector<Series> out;
  for (std::size_t i = 0; i < per_scale.size(); ++i) {
    if (i == proxy) continue;
    const Series& s = per_scale[i];
    if (s.steps != ref.steps || s.values.size() != ref.values.size())
      throw std::invalid_argument("divergence_series: checkpoints of scale " +
                                  std::to_string(s.scale) + " do not match the proxy");
    Series g;
    g.scale = s.scale;
    g.steps = s.steps;
    g.values.resize(s.values.size());
    for (std::size_t t = 0; t < s.values.size(); ++t) g.values[t] = std::abs(s.values[t] - ref.values[t]);
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end(), [](const Series& a, const Series& b) { return a.scale < b.scale; });
  return out;
}

numerics::PowerLawFit powerlaw_divergence(const Series& g) {
  std::vector<double> ts, ys;
  for (std::size_t i = 0; i < g.steps.size() && i < g.values.size(); ++i) {
    if (g.steps[i] <= 0 || !(g.values[i] > 0.0) || !std::isfinite(g.values[i])) continue;
    ts.push_back(static_cast<double>(g.steps[i]));
    ys.push_back(g.values[i]);
  }
  if (ts.size() < 2) throw std::invalid_argument("powerlaw_divergence: fewer than two usable points");
  return numerics::loglog_linfit(ts, ys);
}

std::vector<OptimalLr> optimal_lr(const std::vector<LrCurve>& curves) {
  std::vector<OptimalLr> out;
  for (const auto& c : curves) {
    if (c.lrs.size() != c.losses.size())
      throw std::invalid_argument("optimal_lr: lrs and losses differ in length");
    if (c.lrs.size() < 2) throw std::invalid_argument("optimal_lr: need at least two lr points");
    OptimalLr o;
    o.scale = c.scale;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < c.lrs.size(); ++i) {
      const double l = std::isnan(c.losses[i]) ? std::numeric_limits<double>::infinity() : c.losses[i];
      if (l == std::numeric_limits<double>::infinity()) continue;
      if (!found || l < best || (l == best && c.lrs[i] < c.lrs[o.index])) {
        best = l;
        o.index = i;
        found = true;
      }
    }
    o.all_diverged = !found;
    o.lr = found ? c.lrs[o.index] : std::numeric_limits<double>::quiet_NaN();
    out.push_back(o);
  }
  return out;
}

std::string TransferVerdict::to_string() const {
  switch (kind) {
    case TransferKind::kTransfers: return "transfers(" + std::to_string(cells) + ")";
    case TransferKind::kShifts: return "shifts(" + std::to_string(cells) + ")";
    case TransferKind::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

TransferVerdict transfer_verdict(const std::vector<OptimalLr>& optima) {
  TransferVerdict v;
  if (optima.empty()) return v;
  for (const auto& o : optima)
    if (o.all_diverged) return v;

  // Grid cells are positions in the union of argmin lrs' grids; with a shared
  // grid this is the index itself.
  std::size_t ref = 0;
  for (std::size_t i = 1; i < optima.size(); ++i)
    if (optima[i].scale > optima[ref].scale) ref = i;
  int worst = 0;
  for (const auto& o : optima)
    worst = std::max(worst, std::abs(static_cast<int>(o.index) - static_cast<int>(optima[ref].index)));
  v.cells = worst;
  v.kind = worst <= 1 ? TransferKind::kTransfers : TransferKind::kShifts;
  return v;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kSuperConsistent: return "super_consistent";
    case Verdict::kViolated: return "violated";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Verdict consistency_verdict(const std::vector<ScaleFit>& fits, double proxy_final,
                            const ConsistencyThresholds& thr) {
  const double band = thr.band * std::abs(proxy_final);
  for (const auto& f : fits) {
    if (f.fit && f.fit->beta > thr.beta && f.fit->r2 > thr.r2 && f.final_g > band)
      return Verdict::kViolated;
  }
  bool any = false;
  for (const auto& f : fits) {
    if (f.scale < thr.min_scale) continue;
    any = true;
    if (!(f.final_g <= band)) return Verdict::kInconclusive;
  }
  return any ? Verdict::kSuperConsistent : Verdict::kInconclusive;
}

double trailing_mean(const std::vector<double>& values, int window) {
  if (values.empty()) throw std::invalid_argument("trailing_mean: empty series");
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(window, 1)), values.size());
  double s = 0.0;
  for (std::size_t i = values.size() - w; i < values.size(); ++i) s += values[i];
  return s / static_cast<double>(w);
}

ConsistencyReport analyze_consistency(std::string quantity, const std::vector<Series>& per_scale,
                                      const ConsistencyThresholds& thr) {
  ConsistencyReport rep;
  rep.quantity = std::move(quantity);
  rep.g = divergence_series(per_scale);
  const auto proxy = std::max_element(per_scale.begin(), per_scale.end(),
                                      [](const Series& a, const Series& b) { return a.scale < b.scale; });
  rep.proxy_final = trailing_mean(proxy->values, thr.final_window);
  for (const auto& g : rep.g) {
    ScaleFit sf;
    sf.scale = g.scale;
    sf.final_g = trailing_mean(g.values, thr.final_window);
    try {
      sf.fit = powerlaw_divergence(g);
    } catch (const std::invalid_argument&) {
      sf.fit.reset();
    }
    rep.fits.push_back(sf);
  }
  rep.verdict = consistency_verdict(rep.fits, rep.proxy_final, thr);
  return rep;
}

double eos_reference(OptimizerKind kind, double eta0, double beta1) {
  if (kind == OptimizerKind::kSgd) {
    if (!(eta0 > 0.0)) throw std::invalid_argument("eos_reference: eta0 must be positive");
    return 2.0 / eta0;
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("eos_reference: beta1 must lie in [0, 1)");
  return 2.0 * (1.0 + beta1) / (1.0 - beta1);
}

}  // namespace mupscope::analysis
