#pragma once

#include <optional>
#include <vector>

#include "mupscope/network/network.hpp"
#include "mupscope/numerics/eigen.hpp"
#include "mupscope/numerics/rng.hpp"

namespace mupscope::spectral {

enum class AdamScaling {
  kPreconditioned,  // D_lr P^-1 H
  kWidthDepth,      // (N / sqrt(L)) H
};

struct SpectralProbeConfig {
  int top_k = 10;
  int power_iter_max = 100;
  double power_tol = 1e-3;
  int hutchinson_probes = 64;
  int ntk_k = 2;
  bool hessian = true;
  bool ntk = true;
  bool trace = true;
  bool directional = true;
  bool gauss_newton = true;
  AdamScaling adam_scaling = AdamScaling::kPreconditioned;
};

struct AdamPreconditioner {
  Vector lr_diag;  // per-parameter learning rate
  Vector p_diag;   // Adam preconditioner diagonal
};

/// SGD: v -> s H v with s = gamma^2 (gamma0^2 under ntp).
/// Adam: v -> D_lr P^-1 H v, or (N/sqrt(L)) H v with kWidthDepth.
LinearOperator preconditioned_hvp_operator(const network::ParameterSet& params,
                                           const network::NetworkConfig& cfg,
                                           const network::Batch& batch,
                                           const network::Objective& obj,
                                           const AdamPreconditioner* adam = nullptr,
                                           AdamScaling scaling = AdamScaling::kPreconditioned);

/// Deflated power iteration with the probe config's iteration limits.
numerics::EigResult hessian_top_eigs(const LinearOperator& op, Index dim,
                                     const SpectralProbeConfig& cfg, numerics::RngStream& rng,
                                     bool symmetric = true);

struct TraceEstimate {
  double mean = 0.0;
  double se = 0.0;
};

/// Mean of v^T op(v) over Rademacher probes and its standard error.
TraceEstimate hessian_trace_hutchinson(const LinearOperator& op, Index dim, int probes,
                                       numerics::RngStream& rng);

/// Top-k eigenvalues of the scaled NTK Gram s K K^T over (example, logit)
/// pairs, dense.
numerics::EigResult ntk_gram_top_eigs(const network::ParameterSet& params,
                                      const network::NetworkConfig& cfg, const Matrix& X, int k);

/// diag(sigma) - sigma sigma^T.
Matrix softmax_hessian(const Vector& sigma);

struct GnResidual {
  double gn_top = 0.0;
  double residual_top = 0.0;  // magnitude
  bool residual_converged = false;
};

/// Gauss-Newton part G = s K^T W K (W the per-example loss Hessian in f,
/// including the reduction factor) and the top magnitude of s H - G.
GnResidual gn_residual_top_eigs(const network::ParameterSet& params,
                                const network::NetworkConfig& cfg, const network::Batch& batch,
                                const network::Objective& obj, const SpectralProbeConfig& probe,
                                numerics::RngStream& rng);

/// g^T op(g) / ||g||^2. Throws std::invalid_argument for g = 0.
double directional_sharpness(const LinearOperator& op, const Vector& grad);

struct SpectralSnapshot {
  int step = 0;
  double sharpness = 0.0;
  std::vector<double> hessian_top_eigs;
  std::vector<bool> hessian_converged;
  std::vector<double> ntk_top_eigs;
  double trace = 0.0;
  double trace_se = 0.0;
  double directional_sharpness = 0.0;
  double gn_top = 0.0;
  double residual_top = 0.0;
  bool residual_converged = false;
  // Which fields were computed; others hold NaN.
  bool has_hessian = false;
  bool has_ntk = false;
  bool has_trace = false;
  bool has_directional = false;
  bool has_gn = false;
};

/// Runs every enabled probe on `batch`. `adam` selects the preconditioned
/// operator.
SpectralSnapshot take_snapshot(int step, const network::ParameterSet& params,
                               const network::NetworkConfig& cfg, const network::Batch& batch,
                               const network::Objective& obj, const SpectralProbeConfig& probe,
                               numerics::RngStream& rng, const AdamPreconditioner* adam = nullptr);

}  // namespace mupscope::spectral
