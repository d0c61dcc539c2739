#include <cmath>
#include <limits>
#include <stdexcept>

#include "mupscope/network/network.hpp"

namespace mupscope::network {

Vector fd_hvp(const std::function<Vector(const Vector&)>& grad_fn, const Vector& theta,
              const Vector& v) {
  if (v.size() != theta.size()) throw std::invalid_argument("fd_hvp: direction length mismatch");
  const double vn = v.norm();
  if (!(vn > 0.0)) throw std::invalid_argument("fd_hvp: direction must be nonzero");
  const Vector u = v / vn;
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + theta.norm());
  const Vector gp = grad_fn(theta + eps * u);
  const Vector gm = grad_fn(theta - eps * u);
  if (!gp.allFinite() || !gm.allFinite())
    throw DivergenceError("fd_hvp: gradient is non-finite at a perturbed point");
  return (gp - gm) * (vn / (2.0 * eps));
}

Vector hvp(const ParameterSet& params, const NetworkConfig& cfg, const Batch& batch,
           const Objective& obj, const Vector& v) {
  auto grad_fn = [&](const Vector& theta) {
    LossGrad lg = loss_and_grad(params.with_values(theta), cfg, batch, obj);
    if (!lg.finite) throw DivergenceError("hvp: loss is non-finite at a perturbed point");
    return lg.grad;
  };
  return fd_hvp(grad_fn, params.flat(), v);
}

}  // namespace mupscope::network
