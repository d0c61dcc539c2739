#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mupscope/numerics/fit.hpp"

namespace mupscope::analysis {

/// A quantity S(t) recorded at checkpoint steps for one model scale.
struct Series {
  double scale = 0.0;
  std::vector<int> steps;
  std::vector<double> values;
};

/// g(t) = |S_N(t) - S_proxy(t)| for each non-proxy scale. The proxy is the
/// largest scale. Throws std::invalid_argument on fewer than two series or
/// mismatched checkpoints.
std::vector<Series> divergence_series(const std::vector<Series>& per_scale);

/// Power-law fit of g(t) after dropping t = 0 and zero entries. Throws
/// std::invalid_argument with fewer than two usable points.
numerics::PowerLawFit powerlaw_divergence(const Series& g);

struct LrCurve {
  double scale = 0.0;
  std::vector<double> lrs;     // ascending
  std::vector<double> losses;  // +inf for diverged runs
};

struct OptimalLr {
  double scale = 0.0;
  std::size_t index = 0;
  double lr = 0.0;
  bool all_diverged = false;
};

/// Argmin per scale; ties go to the smaller lr.
std::vector<OptimalLr> optimal_lr(const std::vector<LrCurve>& curves);

enum class TransferKind { kTransfers, kShifts, kInconclusive };

struct TransferVerdict {
  TransferKind kind = TransferKind::kInconclusive;
  int cells = 0;  // largest distance from the largest scale's argmin
  std::string to_string() const;
};

/// Transfers when every argmin lies within one grid cell of the largest
/// scale's argmin. Any all-diverged scale makes the verdict inconclusive.
TransferVerdict transfer_verdict(const std::vector<OptimalLr>& optima);

enum class Verdict { kSuperConsistent, kViolated, kInconclusive };
std::string_view to_string(Verdict v);

struct ConsistencyThresholds {
  double beta = 0.3;
  double r2 = 0.5;
  double band = 0.1;        // fraction of the proxy's final value
  double min_scale = 0.0;   // scales below are ignored for super consistency
  int final_window = 1;     // trailing checkpoints averaged as "final"
};

struct ScaleFit {
  double scale = 0.0;
  std::optional<numerics::PowerLawFit> fit;  // empty when g has < 2 usable points
  double final_g = 0.0;
};

/// violated        if some scale has beta > thr.beta, r2 > thr.r2 and
///                 final_g > band |proxy_final|
/// super_consistent if final_g <= band |proxy_final| for every scale >= min_scale
/// inconclusive    otherwise
Verdict consistency_verdict(const std::vector<ScaleFit>& fits, double proxy_final,
                            const ConsistencyThresholds& thr);

struct ConsistencyReport {
  std::string quantity;
  std::vector<Series> g;
  std::vector<ScaleFit> fits;
  double proxy_final = 0.0;
  Verdict verdict = Verdict::kInconclusive;
};

/// Mean of the last `window` entries.
double trailing_mean(const std::vector<double>& values, int window);

ConsistencyReport analyze_consistency(std::string quantity, const std::vector<Series>& per_scale,
                                      const ConsistencyThresholds& thr);

enum class OptimizerKind { kSgd, kAdam };

/// SGD: 2/eta0. Adam: 2(1 + beta1)/(1 - beta1). Throws for eta0 <= 0.
double eos_reference(OptimizerKind kind, double eta0, double beta1 = 0.9);

}  // namespace mupscope::analysis
