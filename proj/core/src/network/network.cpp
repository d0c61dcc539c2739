#include "mupscope/network/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mupscope/numerics/rng.hpp"

namespace mupscope::network {

namespace {

std::string lowered(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

Matrix apply_phi(const Matrix& z, Activation a) {
  if (a == Activation::kIdentity) return z;
  return z.cwiseMax(0.0);
}

// Multiplies g by phi'(z) in place. relu'(0) = 0.
void apply_phi_grad(Matrix& g, const Matrix& z, Activation a) {
  if (a == Activation::kIdentity) return;
  g.array() *= (z.array() > 0.0).cast<double>();
}

double branch_scale(const NetworkConfig& cfg) {
  return std::pow(static_cast<double>(cfg.depth), -cfg.parametrization.alpha_effective());
}

double readout_scale(const NetworkConfig& cfg) {
  const double n = static_cast<double>(cfg.width);
  return 1.0 / (cfg.parametrization.gamma(cfg.width) * std::sqrt(n));
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::kRelu ? "relu" : "identity"; }
std::string_view to_string(LossKind l) { return l == LossKind::kMse ? "mse" : "cross_entropy"; }
std::string_view to_string(Reduction r) { return r == Reduction::kMean ? "mean" : "sum"; }

Activation activation_from_string(std::string_view name) {
  const std::string s = lowered(name);
  if (s == "relu") return Activation::kRelu;
  if (s == "identity" || s == "linear") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "' (relu|identity)");
}

LossKind loss_kind_from_string(std::string_view name) {
  const std::string s = lowered(name);
  if (s == "mse") return LossKind::kMse;
  if (s == "cross_entropy" || s == "ce") return LossKind::kCrossEntropy;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "' (mse|cross_entropy)");
}

Reduction reduction_from_string(std::string_view name) {
  const std::string s = lowered(name);
  if (s == "mean") return Reduction::kMean;
  if (s == "sum") return Reduction::kSum;
  throw std::invalid_argument("unknown loss reduction '" + std::string(name) + "' (mean|sum)");
}

void NetworkConfig::validate() const {
  if (width < 1) throw std::invalid_argument("network.width must be >= 1");
  if (depth < 1) throw std::invalid_argument("network.depth must be >= 1");
  if (block_depth < 1) throw std::invalid_argument("network.block_depth must be >= 1");
  if (tau != 0 && tau != 1) throw std::invalid_argument("network.tau must be 0 or 1");
  if (input_dim < 1) throw std::invalid_argument("data.input_dim must be >= 1");
  if (num_classes < 1) throw std::invalid_argument("data.num_classes must be >= 1");
  if (!(parametrization.gamma0 > 0.0))
    throw std::invalid_argument("network.gamma0 must be positive");
  if (parametrization.alpha < 0.0 || parametrization.alpha > 1.0)
    throw std::invalid_argument("network.alpha must lie in [0, 1]");
}

ParameterSet::ParameterSet(const NetworkConfig& cfg) : block_depth_(cfg.block_depth) {
  cfg.validate();
  auto layout = std::make_shared<std::vector<Slice>>();
  Index off = 0;
  auto add = [&](std::string name, Index r, Index c) {
    layout->push_back(Slice{std::move(name), off, r, c});
    off += r * c;
  };
  add("W0", cfg.width, cfg.input_dim);
  for (Index b = 0; b < cfg.num_blocks(); ++b)
    for (Index j = 0; j < cfg.block_depth; ++j)
      add("W" + std::to_string(b + 1) + "." + std::to_string(j), cfg.width, cfg.width);
  add("WL", cfg.num_classes, cfg.width);
  layout_ = std::move(layout);
  theta_ = Vector::Zero(off);
}

MatrixMap ParameterSet::view(std::size_t i) {
  const Slice& s = slice(i);
  return MatrixMap(theta_.data() + s.offset, s.rows, s.cols);
}

ConstMatrixMap ParameterSet::view(std::size_t i) const {
  const Slice& s = slice(i);
  return ConstMatrixMap(theta_.data() + s.offset, s.rows, s.cols);
}

ParameterSet ParameterSet::with_values(Vector theta) const {
  if (theta.size() != theta_.size())
    throw std::invalid_argument("ParameterSet::with_values: length " +
                                std::to_string(theta.size()) + ", expected " +
                                std::to_string(theta_.size()));
  ParameterSet out = *this;
  out.theta_ = std::move(theta);
  return out;
}

Index parameter_count(const NetworkConfig& cfg) {
  return cfg.width * cfg.input_dim + cfg.num_blocks() * cfg.block_depth * cfg.width * cfg.width +
         cfg.num_classes * cfg.width;
}

ParameterSet init_network(const NetworkConfig& cfg) {
  ParameterSet p(cfg);
  numerics::RngStream rng(cfg.seed, 0);
  rng.fill_gaussian(p.flat());
  return p;
}

ForwardTrace forward(const ParameterSet& params, const NetworkConfig& cfg, const Matrix& X) {
  if (X.cols() != cfg.input_dim)
    throw std::invalid_argument("forward: input has " + std::to_string(X.cols()) +
                                " columns, expected " + std::to_string(cfg.input_dim));
  if (params.size() != parameter_count(cfg))
    throw std::invalid_argument("forward: parameter count does not match config");

  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(cfg.width));
  const double bscale = branch_scale(cfg);
  const double tau = static_cast<double>(cfg.tau);

  ForwardTrace tr;
  tr.h.reserve(static_cast<std::size_t>(cfg.depth));
  tr.h.emplace_back(X * params.input_layer().transpose() /
                    std::sqrt(static_cast<double>(cfg.input_dim)));

  for (Index b = 0; b < cfg.num_blocks(); ++b) {
    const Matrix& hb = tr.h.back();
    std::vector<Matrix> inner;
    inner.reserve(static_cast<std::size_t>(cfg.block_depth));
    Matrix u = apply_phi(hb, cfg.activation);
    for (Index j = 0; j < cfg.block_depth; ++j) {
      Matrix z = inv_sqrt_n * (u * params.view(params.block_layer(b, j)).transpose());
      if (j + 1 < cfg.block_depth) u = apply_phi(z, cfg.activation);
      inner.push_back(std::move(z));
    }
    Matrix next = bscale * inner.back();
    if (cfg.tau != 0) next += tau * hb;
    tr.inner.push_back(std::move(inner));
    tr.h.push_back(std::move(next));
  }

  tr.f = readout_scale(cfg) * (apply_phi(tr.h.back(), cfg.activation) * params.readout().transpose());
  return tr;
}

Vector backward(const ParameterSet& params, const NetworkConfig& cfg, const Matrix& X,
                const ForwardTrace& tr, const Matrix& upstream) {
  if (upstream.rows() != tr.f.rows() || upstream.cols() != tr.f.cols())
    throw std::invalid_argument("backward: upstream shape does not match outputs");

  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(cfg.width));
  const double bscale = branch_scale(cfg);
  const double tau = static_cast<double>(cfg.tau);

  ParameterSet grad = params.with_values(Vector::Zero(params.size()));

  const double rs = readout_scale(cfg);
  const Matrix phi_last = apply_phi(tr.h.back(), cfg.activation);
  grad.readout().noalias() = rs * upstream.transpose() * phi_last;
  Matrix dh = rs * (upstream * params.readout());
  apply_phi_grad(dh, tr.h.back(), cfg.activation);

  for (Index b = cfg.num_blocks() - 1; b >= 0; --b) {
    const Matrix& hb = tr.h[static_cast<std::size_t>(b)];
    const auto& inner = tr.inner[static_cast<std::size_t>(b)];
    Matrix dz = bscale * dh;
    for (Index j = cfg.block_depth - 1; j >= 0; --j) {
      const Matrix u = j == 0 ? apply_phi(hb, cfg.activation)
                              : apply_phi(inner[static_cast<std::size_t>(j - 1)], cfg.activation);
      const std::size_t idx = params.block_layer(b, j);
      grad.view(idx).noalias() = inv_sqrt_n * dz.transpose() * u;
      Matrix du = inv_sqrt_n * (dz * params.view(idx));
      if (j > 0) {
        apply_phi_grad(du, inner[static_cast<std::size_t>(j - 1)], cfg.activation);
        dz = std::move(du);
      } else {
        apply_phi_grad(du, hb, cfg.activation);
        if (cfg.tau != 0)
          dh = tau * dh + du;
        else
          dh = std::move(du);
      }
    }
  }

  grad.input_layer().noalias() =
      (1.0 / std::sqrt(static_cast<double>(cfg.input_dim))) * dh.transpose() * X;
  return std::move(grad.flat());
}

namespace {

double batch_loss(const Matrix& f, const Batch& batch, const Objective& obj) {
  const Index B = f.rows();
  double total = 0.0;
  if (obj.loss == LossKind::kMse) {
    if (batch.Y.rows() != B || batch.Y.cols() != f.cols())
      throw std::invalid_argument("mse loss: targets must be " + std::to_string(B) + "x" +
                                  std::to_string(f.cols()));
    total = 0.5 * (f - batch.Y).squaredNorm();
  } else {
    if (static_cast<Index>(batch.labels.size()) != B)
      throw std::invalid_argument("cross-entropy loss: expected one label per example");
    for (Index i = 0; i < B; ++i) {
      const int y = batch.labels[static_cast<std::size_t>(i)];
      if (y < 0 || y >= f.cols()) throw std::invalid_argument("cross-entropy loss: label out of range");
      const double m = f.row(i).maxCoeff();
      const double lse = m + std::log((f.row(i).array() - m).exp().sum());
      total += lse - f(i, y);
    }
  }
  return obj.reduction == Reduction::kMean ? total / static_cast<double>(B) : total;
}

}  // namespace

Matrix output_residual(const Matrix& f, const Batch& batch, const Objective& obj) {
  const Index B = f.rows();
  Matrix g;
  if (obj.loss == LossKind::kMse) {
    g = f - batch.Y;
  } else {
    g.resize(B, f.cols());
    for (Index i = 0; i < B; ++i) {
      const double m = f.row(i).maxCoeff();
      Eigen::RowVectorXd p = (f.row(i).array() - m).exp();
      p /= p.sum();
      g.row(i) = p;
      g(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
    }
  }
  if (obj.reduction == Reduction::kMean) g /= static_cast<double>(B);
  return g;
}

double loss_value(const ParameterSet& params, const NetworkConfig& cfg, const Batch& batch,
                  const Objective& obj) {
  return batch_loss(forward(params, cfg, batch.X).f, batch, obj);
}

LossGrad loss_and_grad(const ParameterSet& params, const NetworkConfig& cfg, const Batch& batch,
                       const Objective& obj) {
  const ForwardTrace tr = forward(params, cfg, batch.X);
  LossGrad out;
  out.loss = batch_loss(tr.f, batch, obj);
  if (!std::isfinite(out.loss)) {
    out.finite = false;
    out.grad = Vector::Zero(params.size());
    return out;
  }
  out.grad = backward(params, cfg, batch.X, tr, output_residual(tr.f, batch, obj));
  out.finite = out.grad.allFinite();
  return out;
}

Matrix per_example_grads(const ParameterSet& params, const NetworkConfig& cfg, const Matrix& X) {
  const Index B = X.rows();
  const Index C = cfg.num_classes;
  const Index P = params.size();
  if (B * C * P > kJacobianBudget)
    throw std::length_error("per_example_grads: " + std::to_string(B * C) + " x " +
                            std::to_string(P) + " Jacobian exceeds budget");
  Matrix K(B * C, P);
  for (Index i = 0; i < B; ++i) {
    const Matrix xi = X.row(i);
    const ForwardTrace tr = forward(params, cfg, xi);
    for (Index c = 0; c < C; ++c) {
      Matrix up = Matrix::Zero(1, C);
      up(0, c) = 1.0;
      K.row(i * C + c) = backward(params, cfg, xi, tr, up).transpose();
    }
  }
  return K;
}

std::vector<double> coordinate_delta(const ForwardTrace& a, const ForwardTrace& b) {
  if (a.h.size() != b.h.size()) throw std::invalid_argument("coordinate_delta: depth mismatch");
  std::vector<double> out;
  auto mean_abs = [](const Matrix& x, const Matrix& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
      throw std::invalid_argument("coordinate_delta: shape mismatch");
    return x.size() == 0 ? 0.0 : (x - y).cwiseAbs().mean();
  };
  for (std::size_t l = 0; l < a.h.size(); ++l) out.push_back(mean_abs(a.h[l], b.h[l]));
  out.push_back(mean_abs(a.f, b.f));
  return out;
}

}  // namespace mupscope::network
