#include "mupscope/spectral/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mupscope::spectral {

using network::Batch;
using network::NetworkConfig;
using network::Objective;
using network::ParameterSet;

LinearOperator preconditioned_hvp_operator(const ParameterSet& params, const NetworkConfig& cfg,
                                           const Batch& batch, const Objective& obj,
                                           const AdamPreconditioner* adam, AdamScaling scaling) {
  if (adam == nullptr) {
    const double s = cfg.parametrization.hessian_scale(cfg.width);
    return [=, &params, &cfg, &batch](const Vector& v) {
      return Vector(s * network::hvp(params, cfg, batch, obj, v));
    };
  }
  if (scaling == AdamScaling::kWidthDepth) {
    const double s = static_cast<double>(cfg.width) / std::sqrt(static_cast<double>(cfg.depth));
    return [=, &params, &cfg, &batch](const Vector& v) {
      return Vector(s * network::hvp(params, cfg, batch, obj, v));
    };
  }
  if (adam->lr_diag.size() != params.size() || adam->p_diag.size() != params.size())
    throw std::invalid_argument("Adam preconditioner size does not match parameters");
  const Vector scale = adam->lr_diag.cwiseQuotient(adam->p_diag);
  return [=, &params, &cfg, &batch](const Vector& v) {
    return Vector(scale.cwiseProduct(network::hvp(params, cfg, batch, obj, v)));
  };
}

numerics::EigResult hessian_top_eigs(const LinearOperator& op, Index dim,
                                     const SpectralProbeConfig& cfg, numerics::RngStream& rng,
                                     bool symmetric) {
  numerics::PowerIterationOptions opt;
  opt.max_iter = cfg.power_iter_max;
  opt.tol = cfg.power_tol;
  opt.symmetric = symmetric;
  const int k = static_cast<int>(std::min<Index>(cfg.top_k, dim));
  return numerics::power_iteration_top_k(op, dim, k, rng, opt);
}

TraceEstimate hessian_trace_hutchinson(const LinearOperator& op, Index dim, int probes,
                                       numerics::RngStream& rng) {
  if (probes < 1) throw std::invalid_argument("hutchinson: probes must be >= 1");
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < probes; ++i) {
    const Vector z = rng.rademacher_vector(dim);
    const double q = z.dot(op(z));
    sum += q;
    sumsq += q * q;
  }
  const double n = static_cast<double>(probes);
  TraceEstimate est;
  est.mean = sum / n;
  if (probes > 1) {
    const double var = std::max(0.0, (sumsq - n * est.mean * est.mean) / (n - 1.0));
    est.se = std::sqrt(var / n);
  }
  return est;
}

namespace {

numerics::EigResult top_of(const numerics::EigResult& full, int k) {
  numerics::EigResult r;
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), full.size());
  r.eigenvalues.assign(full.eigenvalues.begin(), full.eigenvalues.begin() + static_cast<long>(m));
  r.iterations.assign(full.iterations.begin(), full.iterations.begin() + static_cast<long>(m));
  r.converged.assign(full.converged.begin(), full.converged.begin() + static_cast<long>(m));
  r.rayleigh.assign(full.rayleigh.begin(), full.rayleigh.begin() + static_cast<long>(m));
  return r;
}

// Per-example loss Hessian in f, square-rooted, times the reduction factor.
// Returns the weighted Jacobian W^{1/2} K so that G = s (W^{1/2}K)^T (W^{1/2}K).
Matrix weighted_jacobian(const ParameterSet& params, const NetworkConfig& cfg, const Batch& batch,
                         const Objective& obj) {
  Matrix K = network::per_example_grads(params, cfg, batch.X);
  const Index B = batch.size();
  const Index C = cfg.num_classes;
  const double red = obj.reduction == network::Reduction::kMean ? 1.0 / static_cast<double>(B) : 1.0;
  if (obj.loss == network::LossKind::kMse) return std::sqrt(red) * K;

  const Matrix f = network::forward(params, cfg, batch.X).f;
  Matrix out(K.rows(), K.cols());
  for (Index i = 0; i < B; ++i) {
    const double m = f.row(i).maxCoeff();
    Vector sigma = (f.row(i).array() - m).exp().transpose();
    sigma /= sigma.sum();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(softmax_hessian(sigma)));
    const Eigen::MatrixXd root = es.eigenvectors() *
                                 es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                 es.eigenvectors().transpose();
    out.middleRows(i * C, C) = std::sqrt(red) * (root * K.middleRows(i * C, C));
  }
  return out;
}

}  // namespace

numerics::EigResult ntk_gram_top_eigs(const ParameterSet& params, const NetworkConfig& cfg,
                                      const Matrix& X, int k) {
  const Matrix K = network::per_example_grads(params, cfg, X);
  const double s = cfg.parametrization.hessian_scale(cfg.width);
  const Matrix gram = s * (K * K.transpose());
  return top_of(numerics::dense_sym_eig(gram), k);
}

Matrix softmax_hessian(const Vector& sigma) {
  Matrix h = -sigma * sigma.transpose();
  h.diagonal() += sigma;
  return h;
}

GnResidual gn_residual_top_eigs(const ParameterSet& params, const NetworkConfig& cfg,
                                const Batch& batch, const Objective& obj,
                                const SpectralProbeConfig& probe, numerics::RngStream& rng) {
  const double s = cfg.parametrization.hessian_scale(cfg.width);
  const Matrix WK = weighted_jacobian(params, cfg, batch, obj);
  GnResidual out;
  const Matrix small = s * (WK * WK.transpose());
  out.gn_top = numerics::dense_sym_eig(small).eigenvalues.front();

  const LinearOperator h = preconditioned_hvp_operator(params, cfg, batch, obj);
  const LinearOperator residual = [&](const Vector& v) {
    const Vector gv = s * (WK.transpose() * (WK * v));
    return Vector(h(v) - gv);
  };
  numerics::PowerIterationOptions opt;
  opt.max_iter = probe.power_iter_max;
  opt.tol = probe.power_tol;
  const auto r = numerics::power_iteration_top_k(residual, params.size(), 1, rng, opt);
  out.residual_top = std::abs(r.eigenvalues.front());
  out.residual_converged = r.converged.front();
  return out;
}

double directional_sharpness(const LinearOperator& op, const Vector& grad) {
  const double g2 = grad.squaredNorm();
  if (!(g2 > 0.0)) throw std::invalid_argument("directional_sharpness: gradient is zero");
  return grad.dot(op(grad)) / g2;
}

SpectralSnapshot take_snapshot(int step, const ParameterSet& params, const NetworkConfig& cfg,
                               const Batch& batch, const Objective& obj,
                               const SpectralProbeConfig& probe, numerics::RngStream& rng,
                               const AdamPreconditioner* adam) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  SpectralSnapshot snap;
  snap.step = step;
  snap.sharpness = snap.trace = snap.trace_se = snap.directional_sharpness = nan;
  snap.gn_top = snap.residual_top = nan;

  const LinearOperator op = preconditioned_hvp_operator(params, cfg, batch, obj, adam,
                                                        probe.adam_scaling);
  const bool symmetric = adam == nullptr || probe.adam_scaling == AdamScaling::kWidthDepth;
  const Index P = params.size();

  if (probe.hessian) {
    const auto eig = hessian_top_eigs(op, P, probe, rng, symmetric);
    snap.hessian_top_eigs = eig.eigenvalues;
    snap.hessian_converged = eig.converged;
    snap.sharpness = eig.eigenvalues.front();
    snap.has_hessian = true;
  }
  if (probe.ntk) {
    snap.ntk_top_eigs = ntk_gram_top_eigs(params, cfg, batch.X, probe.ntk_k).eigenvalues;
    snap.has_ntk = true;
  }
  if (probe.trace) {
    const auto tr = hessian_trace_hutchinson(op, P, probe.hutchinson_probes, rng);
    snap.trace = tr.mean;
    snap.trace_se = tr.se;
    snap.has_trace = true;
  }
  if (probe.directional) {
    const network::LossGrad lg = network::loss_and_grad(params, cfg, batch, obj);
    if (lg.finite && lg.grad.squaredNorm() > 0.0) {
      snap.directional_sharpness = directional_sharpness(op, lg.grad);
      snap.has_directional = true;
    }
  }
  if (probe.gauss_newton) {
    const auto gr = gn_residual_top_eigs(params, cfg, batch, obj, probe, rng);
    snap.gn_top = gr.gn_top;
    snap.residual_top = gr.residual_top;
    snap.residual_converged = gr.residual_converged;
    snap.has_gn = true;
  }
  return snap;
}

}  // namespace mupscope::spectral
