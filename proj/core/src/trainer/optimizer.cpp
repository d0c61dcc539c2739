#include "mupscope/trainer/optimizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mupscope::trainer {

std::string_view to_string(Algo a) { return a == Algo::kSgd ? "sgd" : "adam"; }

Algo algo_from_string(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "sgd") return Algo::kSgd;
  if (s == "adam") return Algo::kAdam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (sgd|adam)");
}

double nominal_lr(const network::NetworkConfig& net, const OptimizerConfig& opt) {
  double lr = net.parametrization.learning_rate(net.width, net.depth);
  if (opt.lr_depth_scale) lr /= std::sqrt(static_cast<double>(net.depth));
  return lr;
}

Vector lr_diagonal(const network::ParameterSet& params, const network::NetworkConfig& net,
                   const OptimizerConfig& opt) {
  const double base = nominal_lr(net, opt);
  const double edge = net.parametrization.nonresidual_lr_multiplier(net.depth);
  Vector d(params.size());
  const std::size_t last = params.num_slices() - 1;
  for (std::size_t i = 0; i < params.num_slices(); ++i) {
    const auto& s = params.slice(i);
    double lr = base;
    if (i == 0 || i == last) lr *= edge;
    if (opt.random_feature_mode && i != last) lr = 0.0;
    d.segment(s.offset, s.size()).setConstant(lr);
  }
  return d;
}

double warmup_factor(long t, int warmup_steps) {
  if (warmup_steps <= 0) return 1.0;
  return std::min(1.0, static_cast<double>(t) / static_cast<double>(warmup_steps));
}

OptimizerState init_optimizer_state(Index size) {
  OptimizerState s;
  s.m = Vector::Zero(size);
  s.nu = Vector::Zero(size);
  return s;
}

Vector adam_preconditioner(const OptimizerState& state, const OptimizerConfig& opt) {
  if (state.t < 1) throw std::logic_error("adam_preconditioner: no update applied yet");
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  return bc1 * ((state.nu.array() / bc2).sqrt() + opt.eps_adam).matrix();
}

double optimizer_step(OptimizerState& state, Vector& theta, const Vector& grad,
                      const Vector& lr_diag, const OptimizerConfig& opt, bool& finite) {
  if (grad.size() != theta.size() || lr_diag.size() != theta.size())
    throw std::invalid_argument("optimizer_step: size mismatch");
  state.t += 1;
  const double fw = warmup_factor(state.t, opt.warmup_steps);
  if (opt.algo == Algo::kSgd) {
    theta.array() -= fw * lr_diag.array() * grad.array();
  } else {
    if (state.m.size() != theta.size()) state = [&] {
      OptimizerState s = init_optimizer_state(theta.size());
      s.t = state.t;
      return s;
    }();
    state.m = opt.beta1 * state.m + (1.0 - opt.beta1) * grad;
    state.nu = opt.beta2 * state.nu + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
    const Vector p = adam_preconditioner(state, opt);
    theta.array() -= fw * lr_diag.array() * state.m.array() / p.array();
  }
  finite = theta.allFinite();
  return fw;
}

}  // namespace mupscope::trainer
