#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mupscope/network/parametrization.hpp"
#include "mupscope/numerics/types.hpp"

namespace mupscope::network {

enum class Activation { kRelu, kIdentity };
enum class LossKind { kMse, kCrossEntropy };
enum class Reduction { kMean, kSum };

std::string_view to_string(Activation a);
std::string_view to_string(LossKind l);
std::string_view to_string(Reduction r);
Activation activation_from_string(std::string_view name);
LossKind loss_kind_from_string(std::string_view name);
Reduction reduction_from_string(std::string_view name);

/// Residual MLP
///   h1      = W0 x / sqrt(D)
///   h_{b+1} = tau h_b + branch_b(h_b) / L^alpha,     b = 1 .. L-1
///   f       = WL phi(h_L) / (gamma sqrt(N))
/// where branch_b composes `block_depth` N x N layers, each u -> W u / sqrt(N)
/// with phi between consecutive layers and phi applied to h_b on entry.
struct NetworkConfig {
  Index width = 64;
  Index depth = 2;
  int tau = 1;
  Index block_depth = 1;
  Activation activation = Activation::kRelu;
  Index input_dim = 8;
  Index num_classes = 1;
  Parametrization parametrization;
  std::uint64_t seed = 0;

  Index num_blocks() const { return depth - 1; }
  /// Throws std::invalid_argument on inconsistent fields.
  void validate() const;
};

struct Slice {
  std::string name;
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;
  Index size() const { return rows * cols; }
};

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// Flat parameter vector with a shared, immutable slice layout: W0, then
/// W{b}.{j} for block b and inner layer j, then WL.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(const NetworkConfig& cfg);

  Index size() const { return theta_.size(); }
  Vector& flat() { return theta_; }
  const Vector& flat() const { return theta_; }
  const std::vector<Slice>& slices() const { return *layout_; }
  const Slice& slice(std::size_t i) const { return (*layout_)[i]; }
  std::size_t num_slices() const { return layout_->size(); }

  MatrixMap view(std::size_t i);
  ConstMatrixMap view(std::size_t i) const;

  MatrixMap input_layer() { return view(0); }
  ConstMatrixMap input_layer() const { return view(0); }
  MatrixMap readout() { return view(num_slices() - 1); }
  ConstMatrixMap readout() const { return view(num_slices() - 1); }
  /// Slice index of inner layer j of residual block b (0-based).
  std::size_t block_layer(Index b, Index j) const { return 1 + static_cast<std::size_t>(b * block_depth_ + j); }

  /// Same layout, different values.
  ParameterSet with_values(Vector theta) const;

 private:
  Vector theta_;
  std::shared_ptr<const std::vector<Slice>> layout_ = std::make_shared<const std::vector<Slice>>();
  Index block_depth_ = 1;
};

/// Number of parameters for a config.
Index parameter_count(const NetworkConfig& cfg);

/// All entries i.i.d. N(0, 1) from stream (cfg.seed, 0).
ParameterSet init_network(const NetworkConfig& cfg);

struct Batch {
  Matrix X;                 // B x D
  Matrix Y;                 // B x C regression targets
  std::vector<int> labels;  // class indices for cross-entropy
  Index size() const { return X.rows(); }
};

struct ForwardTrace {
  std::vector<Matrix> h;                   // h_1 .. h_L, each B x N
  std::vector<std::vector<Matrix>> inner;  // per block, outputs of each inner layer
  Matrix f;                                // B x C
};

ForwardTrace forward(const ParameterSet& params, const NetworkConfig& cfg, const Matrix& X);

struct Objective {
  LossKind loss = LossKind::kMse;
  Reduction reduction = Reduction::kMean;
};

struct LossGrad {
  double loss = 0.0;
  Vector grad;
  bool finite = true;
};

/// Loss value only.
double loss_value(const ParameterSet& params, const NetworkConfig& cfg, const Batch& batch,
                  const Objective& obj);

/// Loss and its exact gradient by reverse accumulation. A non-finite loss
/// sets finite = false rather than throwing.
LossGrad loss_and_grad(const ParameterSet& params, const NetworkConfig& cfg, const Batch& batch,
                       const Objective& obj);

/// dL/df for each example (B x C), scaled by the reduction.
Matrix output_residual(const Matrix& f, const Batch& batch, const Objective& obj);

/// Vector-Jacobian product: sum_i grad_f(x_i)^T g_i for an upstream B x C
/// matrix g.
Vector backward(const ParameterSet& params, const NetworkConfig& cfg, const Matrix& X,
                const ForwardTrace& trace, const Matrix& upstream);

inline constexpr Index kJacobianBudget = 64'000'000;

/// Rows of K: row i * C + c is grad_theta f_c(x_i). Throws std::length_error
/// above kJacobianBudget entries.
Matrix per_example_grads(const ParameterSet& params, const NetworkConfig& cfg, const Matrix& X);

/// Central-difference Hessian-vector product of an arbitrary gradient map:
/// (g(theta + eps u) - g(theta - eps u)) / (2 eps) * ||v||, u = v/||v||,
/// eps = sqrt(machine eps) (1 + ||theta||). Throws std::invalid_argument for
/// v = 0 and DivergenceError on non-finite gradients.
Vector fd_hvp(const std::function<Vector(const Vector&)>& grad_fn, const Vector& theta,
              const Vector& v);

/// Raw Hessian-vector product of the batch loss.
Vector hvp(const ParameterSet& params, const NetworkConfig& cfg, const Batch& batch,
           const Objective& obj, const Vector& v);

/// Per-layer mean |h_t - h_0| for h_1 .. h_L, followed by the output f.
std::vector<double> coordinate_delta(const ForwardTrace& trace_t, const ForwardTrace& trace_0);

}  // namespace mupscope::network
