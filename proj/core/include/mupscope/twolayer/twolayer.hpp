#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mupscope/numerics/types.hpp"

// Two-layer linear network f(x) = x^T E V / (gamma sqrt(N D)) trained on the
// identity design X = I_D, Y = w_star, and its closed latent dynamics.
namespace mupscope::twolayer {

enum class Scheme { kMup, kNtp, kSp };

std::string_view to_string(Scheme s);
/// Accepts "mup", "ntp", "sp" (case-insensitive). Throws std::invalid_argument.
Scheme scheme_from_string(std::string_view name);

struct TwoLayerParams {
  Matrix E;  // D x N
  Vector V;  // N
  double gamma = 1.0;
  Scheme scheme = Scheme::kMup;

  Index N() const { return E.cols(); }
  Index D() const { return E.rows(); }
};

/// (w, e, v). For kSp the triple is unnormalized: (EV, EE^T, V^T V).
struct LatentState {
  Vector w;
  Matrix e;
  double v = 0.0;

  Index D() const { return w.size(); }
};

struct CaseStudyConfig {
  Index D = 2;
  Index N = 4;
  Scheme scheme = Scheme::kMup;
  double eta0 = 0.1;
  double gamma0 = 1.0;
  Vector w_star;
  std::uint64_t seed = 0;
};

/// gamma0 sqrt(N) for muP, gamma0 for NTP, 1 for SP.
double gamma_for(Scheme s, double gamma0, Index N);

/// The coefficient gamma^2/(ND) of the latent map. Under muP the width is
/// cancelled symbolically (gamma0^2/D), so the value is bitwise N-independent.
/// SP uses 1.
double latent_coupling(Scheme s, double gamma0, Index N, Index D);

/// GD step size: eta0 gamma^2 (eta0 itself for SP).
double step_size(const TwoLayerParams& p, double eta0);

TwoLayerParams init_two_layer(const CaseStudyConfig& cfg);

LatentState project_latent(const TwoLayerParams& p);

/// Model output on the identity design, i.e. w.
Vector predict(const TwoLayerParams& p);

/// 0.5 ||w - w_star||^2.
double reduced_loss(const LatentState& s, const Vector& w_star);

/// One full-batch GD step. Throws DivergenceError on non-finite entries.
TwoLayerParams gd_step_params(const TwoLayerParams& p, const Vector& w_star, double eta0);

/// The latent map with an explicit coupling kappa = gamma^2/(ND):
///   w+ = w - eta0 (v I + e) r + eta0^2 kappa r (w^T r)
///   e+ = e - eta0 kappa (r w^T + w r^T) + eta0^2 kappa v r r^T
///   v+ = v - 2 eta0 kappa w^T r + eta0^2 kappa r^T e r
/// with r = w - w_star. No drift checks; used for finite differencing.
LatentState latent_map(const LatentState& s, const Vector& w_star, double eta0, double kappa);

/// Checked latent step with kappa supplied directly. Throws DivergenceError
/// on non-finite output and std::runtime_error if e loses symmetry or v turns
/// negative beyond 1e-8.
LatentState latent_step(const LatentState& s, const Vector& w_star, double eta0, double kappa);

/// Checked latent step with kappa = gamma^2/(N D).
LatentState latent_step(const LatentState& s, const Vector& w_star, double eta0, double gamma,
                        Index N, Index D);

/// SP recursion on unnormalized (EV, EE^T, V^T V) with raw step size eta.
LatentState sp_latent_step(const LatentState& s, const Vector& w_star, double eta);

/// e + v I.
Matrix ntk_latent(const LatentState& s);

/// Jacobian K (D x N(D+1)) of sqrt(g2) * w with respect to theta = (vec E, V),
/// E flattened row-major. g2 is gamma^2 (1 for SP). Theta = K K^T.
Matrix two_layer_jacobian(const TwoLayerParams& p);

struct HessianBlocks {
  Matrix H_scaled;  // gamma^2 Hessian of the reduced loss
  Matrix G;         // Gauss-Newton part K^T K
  Matrix R;         // residual part
};

inline constexpr Index kDenseBudget = 4000;

/// Dense gamma^2-scaled Hessian. Throws std::length_error above kDenseBudget.
HessianBlocks two_layer_hessian(const TwoLayerParams& p, const Vector& w_star);

/// Closed form of lambda_max(R): sqrt(gamma^2/(ND)) ||w - w_star||.
double residual_bound(const TwoLayerParams& p, const Vector& w_star);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// [2/eta0, 2/eta0 + eta0 gamma^2 ||w_star||^2 / (N D)].
Interval eos_interval(double eta0, double gamma, Index N, Index D, const Vector& w_star);

/// Layout: w (D), e row-major (D^2), v.
Vector flatten(const LatentState& s);
LatentState unflatten(const Vector& x, Index D);

/// |eigenvalues| of the central-difference Jacobian (step 1e-6) of the latent
/// map, descending.
std::vector<double> latent_jacobian_spectrum(const LatentState& s, const Vector& w_star,
                                             double eta0, double kappa);
std::vector<double> latent_jacobian_spectrum(const LatentState& s, const Vector& w_star,
                                             double eta0, double gamma, Index N, Index D);

/// Largest magnitude within [1 - tol, 1 + tol].
bool is_marginally_stable(const std::vector<double>& magnitudes, double tol = 1e-3);

// ---------------------------------------------------------------------------
// Trajectories

struct CheckpointRecord {
  int step = 0;
  LatentState latent;
  double loss = 0.0;
  double sharpness = 0.0;  // lambda_max(H_scaled); NaN when not computed
  double ntk_max = 0.0;    // lambda_max(e + v I)
  double bound = 0.0;      // residual_bound
};

struct TrajectoryOptions {
  int steps = 200;
  int record_every = 1;
  bool dense_hessian = false;  // sharpness at each checkpoint
};

/// GD on (E, V) from init_two_layer(cfg). The last step is always recorded.
std::vector<CheckpointRecord> simulate_params(const CaseStudyConfig& cfg,
                                              const TrajectoryOptions& opt);

/// Latent recursion from `start`, recording every step (index 0 = start).
std::vector<LatentState> simulate_latent(const LatentState& start, const Vector& w_star,
                                         double eta0, double kappa, int steps);

/// max over steps of ||project(params_t) - latent_t||_inf, with the latent
/// trajectory started at the projected initialization.
double oracle_deviation(const CaseStudyConfig& cfg, int steps);

/// max_t ||e_t - e_0||_inf along the parameter-space trajectory.
double ntk_drift(const CaseStudyConfig& cfg, int steps);

// ---------------------------------------------------------------------------
// Initialization moments

struct MomentEstimate {
  std::string name;
  double mean = 0.0;
  double mean_se = 0.0;
  double target_mean = 0.0;
  double var = 0.0;
  double var_se = 0.0;
  double target_var = 0.0;

  double mean_z() const;
  double var_z() const;
};

struct MomentReport {
  Scheme scheme = Scheme::kMup;
  Index N = 0;
  Index D = 0;
  int trials = 0;
  std::vector<MomentEstimate> entries;  // v, e_00, e_01 (D >= 2), w_0

  const MomentEstimate& get(std::string_view name) const;
};

/// Empirical moments of (w, e, v) over `trials` independent initializations.
/// Throws std::invalid_argument if trials < 100.
MomentReport init_moment_check(Scheme scheme, Index N, Index D, int trials, std::uint64_t seed,
                               double gamma0 = 1.0);

}  // namespace mupscope::twolayer
