#include "mupscope/twolayer/twolayer.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mupscope/numerics/eigen.hpp"
#include "mupscope/numerics/rng.hpp"

namespace mupscope::twolayer {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::kMup: return "mup";
    case Scheme::kNtp: return "ntp";
    case Scheme::kSp: return "sp";
  }
  return "?";
}

Scheme scheme_from_string(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "mup") return Scheme::kMup;
  if (lower == "ntp") return Scheme::kNtp;
  if (lower == "sp") return Scheme::kSp;
  throw std::invalid_argument("unknown two-layer scheme '" + std::string(name) + "' (mup|ntp|sp)");
}

double gamma_for(Scheme s, double gamma0, Index N) {
  switch (s) {
    case Scheme::kMup: return gamma0 * std::sqrt(static_cast<double>(N));
    case Scheme::kNtp: return gamma0;
    case Scheme::kSp: return 1.0;
  }
  return 1.0;
}

double latent_coupling(Scheme s, double gamma0, Index N, Index D) {
  switch (s) {
    case Scheme::kMup: return gamma0 * gamma0 / static_cast<double>(D);
    case Scheme::kNtp: return gamma0 * gamma0 / (static_cast<double>(N) * static_cast<double>(D));
    case Scheme::kSp: return 1.0;
  }
  return 1.0;
}

namespace {

// Output normalizer c in w = c E V.
double output_scale(const TwoLayerParams& p) {
  if (p.scheme == Scheme::kSp) return 1.0;
  return 1.0 / (p.gamma * std::sqrt(static_cast<double>(p.N()) * static_cast<double>(p.D())));
}

double gram_scale(const TwoLayerParams& p) {
  if (p.scheme == Scheme::kSp) return 1.0;
  return 1.0 / (static_cast<double>(p.N()) * static_cast<double>(p.D()));
}

double hessian_prefactor(const TwoLayerParams& p) {
  return p.scheme == Scheme::kSp ? 1.0 : p.gamma * p.gamma;
}

void check_w_star(const Vector& w_star, Index D) {
  if (w_star.size() != D)
    throw std::invalid_argument("w_star has length " + std::to_string(w_star.size()) +
                                ", expected " + std::to_string(D));
}

}  // namespace

double step_size(const TwoLayerParams& p, double eta0) {
  return p.scheme == Scheme::kSp ? eta0 : eta0 * p.gamma * p.gamma;
}

TwoLayerParams init_two_layer(const CaseStudyConfig& cfg) {
  if (cfg.D < 1 || cfg.N < 1) throw std::invalid_argument("init_two_layer: D and N must be >= 1");
  if (!(cfg.gamma0 > 0.0)) throw std::invalid_argument("init_two_layer: gamma0 must be positive");
  numerics::RngStream rng(cfg.seed, 0);
  TwoLayerParams p;
  p.scheme = cfg.scheme;
  p.gamma = gamma_for(cfg.scheme, cfg.gamma0, cfg.N);
  p.E.resize(cfg.D, cfg.N);
  p.V.resize(cfg.N);
  const bool sp = cfg.scheme == Scheme::kSp;
  rng.fill_gaussian(p.E, sp ? 1.0 / std::sqrt(static_cast<double>(cfg.D)) : 1.0);
  rng.fill_gaussian(p.V, sp ? 1.0 / std::sqrt(static_cast<double>(cfg.N)) : 1.0);
  return p;
}

Vector predict(const TwoLayerParams& p) { return output_scale(p) * (p.E * p.V); }

LatentState project_latent(const TwoLayerParams& p) {
  LatentState s;
  const double g = gram_scale(p);
  s.w = predict(p);
  s.e = g * (p.E * p.E.transpose());
  s.v = g * p.V.squaredNorm();
  return s;
}

double reduced_loss(const LatentState& s, const Vector& w_star) {
  return 0.5 * (s.w - w_star).squaredNorm();
}

TwoLayerParams gd_step_params(const TwoLayerParams& p, const Vector& w_star, double eta0) {
  check_w_star(w_star, p.D());
  const double c = output_scale(p);
  const double eta = step_size(p, eta0);
  const Vector r = c * (p.E * p.V) - w_star;
  TwoLayerParams out = p;
  out.E.noalias() -= (eta * c) * r * p.V.transpose();
  out.V.noalias() -= (eta * c) * (p.E.transpose() * r);
  if (!out.E.allFinite() || !out.V.allFinite())
    throw DivergenceError("two-layer GD step produced non-finite weights");
  return out;
}

LatentState latent_map(const LatentState& s, const Vector& w_star, double eta0, double kappa) {
  const Vector r = s.w - w_star;
  const double wr = s.w.dot(r);
  LatentState out;
  out.w = s.w - eta0 * (s.v * r + s.e * r) + (eta0 * eta0 * kappa * wr) * r;
  out.e = s.e - (eta0 * kappa) * (r * s.w.transpose() + s.w * r.transpose()) +
          (eta0 * eta0 * kappa * s.v) * (r * r.transpose());
  out.v = s.v - 2.0 * eta0 * kappa * wr + eta0 * eta0 * kappa * r.dot(s.e * r);
  return out;
}

LatentState latent_step(const LatentState& s, const Vector& w_star, double eta0, double kappa) {
  check_w_star(w_star, s.D());
  LatentState out = latent_map(s, w_star, eta0, kappa);
  if (!out.w.allFinite() || !out.e.allFinite() || !std::isfinite(out.v))
    throw DivergenceError("latent step produced non-finite state");
  const double asym = (out.e - out.e.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, out.e.cwiseAbs().maxCoeff());
  if (asym > 1e-8 * scale)
    throw std::runtime_error("latent step: e lost symmetry (" + std::to_string(asym) + ")");
  if (out.v < -1e-8) throw std::runtime_error("latent step: v became negative");
  return out;
}

LatentState latent_step(const LatentState& s, const Vector& w_star, double eta0, double gamma,
                        Index N, Index D) {
  if (s.D() != D) throw std::invalid_argument("latent_step: state dimension mismatch");
  const double kappa = gamma * gamma / (static_cast<double>(N) * static_cast<double>(D));
  return latent_step(s, w_star, eta0, kappa);
}

LatentState sp_latent_step(const LatentState& s, const Vector& w_star, double eta) {
  return latent_step(s, w_star, eta, 1.0);
}

Matrix ntk_latent(const LatentState& s) {
  Matrix m = s.e;
  m.diagonal().array() += s.v;
  return m;
}

Matrix two_layer_jacobian(const TwoLayerParams& p) {
  const Index D = p.D(), N = p.N();
  const double s = std::sqrt(hessian_prefactor(p)) * output_scale(p);
  Matrix K = Matrix::Zero(D, N * (D + 1));
  for (Index i = 0; i < D; ++i) {
    for (Index l = 0; l < N; ++l) K(i, i * N + l) = s * p.V[l];
    for (Index l = 0; l < N; ++l) K(i, D * N + l) = s * p.E(i, l);
  }
  return K;
}

HessianBlocks two_layer_hessian(const TwoLayerParams& p, const Vector& w_star) {
  check_w_star(w_star, p.D());
  const Index D = p.D(), N = p.N();
  const Index P = N * (D + 1);
  if (P > kDenseBudget)
    throw std::length_error("two_layer_hessian: dimension " + std::to_string(P) +
                            " exceeds dense budget " + std::to_string(kDenseBudget));
  const double c = output_scale(p);
  const double g2 = hessian_prefactor(p);
  const Vector r = c * (p.E * p.V) - w_star;

  const Matrix K = two_layer_jacobian(p);
  HessianBlocks h;
  h.G = K.transpose() * K;
  h.R = Matrix::Zero(P, P);
  const double rc = g2 * c;
  for (Index i = 0; i < D; ++i)
    for (Index j = 0; j < N; ++j) {
      h.R(i * N + j, D * N + j) = rc * r[i];
      h.R(D * N + j, i * N + j) = rc * r[i];
    }
  h.H_scaled = h.G + h.R;
  return h;
}

double residual_bound(const TwoLayerParams& p, const Vector& w_star) {
  const double c = output_scale(p);
  return hessian_prefactor(p) * c * (c * (p.E * p.V) - w_star).norm();
}

Interval eos_interval(double eta0, double gamma, Index N, Index D, const Vector& w_star) {
  if (!(eta0 > 0.0)) throw std::invalid_argument("eos_interval: eta0 must be positive");
  const double lo = 2.0 / eta0;
  const double kappa = gamma * gamma / (static_cast<double>(N) * static_cast<double>(D));
  return {lo, lo + eta0 * kappa * w_star.squaredNorm()};
}

Vector flatten(const LatentState& s) {
  const Index D = s.D();
  Vector x(D + D * D + 1);
  x.head(D) = s.w;
  for (Index i = 0; i < D; ++i)
    for (Index j = 0; j < D; ++j) x[D + i * D + j] = s.e(i, j);
  x[D + D * D] = s.v;
  return x;
}

LatentState unflatten(const Vector& x, Index D) {
  if (x.size() != D + D * D + 1)
    throw std::invalid_argument("unflatten: length " + std::to_string(x.size()) +
                                " does not match D=" + std::to_string(D));
  LatentState s;
  s.w = x.head(D);
  s.e.resize(D, D);
  for (Index i = 0; i < D; ++i)
    for (Index j = 0; j < D; ++j) s.e(i, j) = x[D + i * D + j];
  s.v = x[D + D * D];
  return s;
}

std::vector<double> latent_jacobian_spectrum(const LatentState& s, const Vector& w_star,
                                             double eta0, double kappa) {
  check_w_star(w_star, s.D());
  const Index D = s.D();
  const Vector x0 = flatten(s);
  const Index n = x0.size();
  constexpr double kStep = 1e-6;
  Eigen::MatrixXd J(n, n);
  for (Index j = 0; j < n; ++j) {
    Vector xp = x0, xm = x0;
    xp[j] += kStep;
    xm[j] -= kStep;
    const Vector gp = flatten(latent_map(unflatten(xp, D), w_star, eta0, kappa));
    const Vector gm = flatten(latent_map(unflatten(xm, D), w_star, eta0, kappa));
    if (!gp.allFinite() || !gm.allFinite())
      throw DivergenceError("latent Jacobian: map evaluation is non-finite");
    J.col(j) = (gp - gm) / (xp[j] - xm[j]);
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(J, false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("latent Jacobian: eigensolver failed");
  std::vector<double> mags(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) mags[static_cast<std::size_t>(i)] = std::abs(solver.eigenvalues()[i]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  return mags;
}

std::vector<double> latent_jacobian_spectrum(const LatentState& s, const Vector& w_star,
                                             double eta0, double gamma, Index N, Index D) {
  if (s.D() != D) throw std::invalid_argument("latent_jacobian_spectrum: dimension mismatch");
  const double kappa = gamma * gamma / (static_cast<double>(N) * static_cast<double>(D));
  return latent_jacobian_spectrum(s, w_star, eta0, kappa);
}

bool is_marginally_stable(const std::vector<double>& magnitudes, double tol) {
  if (magnitudes.empty()) return false;
  const double top = *std::max_element(magnitudes.begin(), magnitudes.end());
  return top >= 1.0 - tol && top <= 1.0 + tol;
}

namespace {

CheckpointRecord make_record(int step, const TwoLayerParams& p, const Vector& w_star,
                             bool dense) {
  CheckpointRecord rec;
  rec.step = step;
  rec.latent = project_latent(p);
  rec.loss = reduced_loss(rec.latent, w_star);
  rec.ntk_max = numerics::dense_sym_eig(ntk_latent(rec.latent)).eigenvalues.front();
  rec.bound = residual_bound(p, w_star);
  rec.sharpness = dense ? numerics::dense_sym_eig(two_layer_hessian(p, w_star).H_scaled)
                              .eigenvalues.front()
                        : std::numeric_limits<double>::quiet_NaN();
  return rec;
}

}  // namespace

std::vector<CheckpointRecord> simulate_params(const CaseStudyConfig& cfg,
                                              const TrajectoryOptions& opt) {
  check_w_star(cfg.w_star, cfg.D);
  if (opt.steps < 0 || opt.record_every < 1)
    throw std::invalid_argument("simulate_params: steps >= 0 and record_every >= 1 required");
  TwoLayerParams p = init_two_layer(cfg);
  std::vector<CheckpointRecord> out;
  out.push_back(make_record(0, p, cfg.w_star, opt.dense_hessian));
  for (int t = 1; t <= opt.steps; ++t) {
    p = gd_step_params(p, cfg.w_star, cfg.eta0);
    if (t % opt.record_every == 0 || t == opt.steps)
      out.push_back(make_record(t, p, cfg.w_star, opt.dense_hessian));
  }
  return out;
}

std::vector<LatentState> simulate_latent(const LatentState& start, const Vector& w_star,
                                         double eta0, double kappa, int steps) {
  std::vector<LatentState> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  traj.push_back(start);
  for (int t = 0; t < steps; ++t) traj.push_back(latent_step(traj.back(), w_star, eta0, kappa));
  return traj;
}

double oracle_deviation(const CaseStudyConfig& cfg, int steps) {
  check_w_star(cfg.w_star, cfg.D);
  TwoLayerParams p = init_two_layer(cfg);
  LatentState s = project_latent(p);
  const double kappa =
      cfg.scheme == Scheme::kSp
          ? 1.0
          : p.gamma * p.gamma / (static_cast<double>(cfg.N) * static_cast<double>(cfg.D));
  double worst = 0.0;
  for (int t = 0; t < steps; ++t) {
    p = gd_step_params(p, cfg.w_star, cfg.eta0);
    s = latent_step(s, cfg.w_star, cfg.eta0, kappa);
    const LatentState q = project_latent(p);
    worst = std::max(worst, (q.w - s.w).cwiseAbs().maxCoeff());
    worst = std::max(worst, (q.e - s.e).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(q.v - s.v));
  }
  return worst;
}

double ntk_drift(const CaseStudyConfig& cfg, int steps) {
  check_w_star(cfg.w_star, cfg.D);
  TwoLayerParams p = init_two_layer(cfg);
  const Matrix e0 = project_latent(p).e;
  double worst = 0.0;
  for (int t = 0; t < steps; ++t) {
    p = gd_step_params(p, cfg.w_star, cfg.eta0);
    worst = std::max(worst, (project_latent(p).e - e0).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace mupscope::twolayer
