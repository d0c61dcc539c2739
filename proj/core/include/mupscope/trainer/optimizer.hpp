#pragma once

#include <string_view>

#include "mupscope/network/network.hpp"

namespace mupscope::trainer {

enum class Algo { kSgd, kAdam };

std::string_view to_string(Algo a);
Algo algo_from_string(std::string_view name);

struct OptimizerConfig {
  Algo algo = Algo::kSgd;
  Index batch_size = 0;  // 0 or >= dataset size means full batch
  int warmup_steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  bool random_feature_mode = false;  // train the readout only
  bool lr_depth_scale = false;       // extra 1/sqrt(L) on every learning rate
};

struct OptimizerState {
  Vector m;
  Vector nu;
  long t = 0;  // updates applied so far
};

/// Per-parameter base learning rate: the parametrization's rate, the
/// non-residual multiplier on W0/WL, the optional 1/sqrt(L), and zero on
/// frozen slices.
Vector lr_diagonal(const network::ParameterSet& params, const network::NetworkConfig& net,
                   const OptimizerConfig& opt);

/// Scalar nominal learning rate (hidden layers) before warmup.
double nominal_lr(const network::NetworkConfig& net, const OptimizerConfig& opt);

/// min(1, t / warmup) for the t-th update (t >= 1).
double warmup_factor(long t, int warmup_steps);

OptimizerState init_optimizer_state(Index size);

/// Applies update number state.t + 1 in place and returns the warmup factor
/// used. Returns false through `finite` if theta left the finite range.
///   SGD:  theta -= f_w lr .* g
///   Adam: theta -= f_w lr .* m ./ P,  P = (1 - b1^t) (sqrt(nu / (1 - b2^t)) + eps)
double optimizer_step(OptimizerState& state, Vector& theta, const Vector& grad,
                      const Vector& lr_diag, const OptimizerConfig& opt, bool& finite);

/// Diagonal of P for the current Adam state (requires t >= 1).
Vector adam_preconditioner(const OptimizerState& state, const OptimizerConfig& opt);

}  // namespace mupscope::trainer
