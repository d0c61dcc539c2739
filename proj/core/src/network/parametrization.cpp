#include "mupscope/network/parametrization.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mupscope::network {

std::string_view to_string(ParamKind k) {
  switch (k) {
    case ParamKind::kNtp: return "ntp";
    case ParamKind::kMup: return "mup";
    case ParamKind::kDepthMupSgd: return "depth_mup_sgd";
    case ParamKind::kDepthMupAdam: return "depth_mup_adam";
  }
  return "?";
}

ParamKind param_kind_from_string(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "ntp") return ParamKind::kNtp;
  if (s == "mup") return ParamKind::kMup;
  if (s == "depth_mup_sgd") return ParamKind::kDepthMupSgd;
  if (s == "depth_mup_adam") return ParamKind::kDepthMupAdam;
  throw std::invalid_argument("unknown parametrization '" + std::string(name) +
                              "' (ntp|mup|depth_mup_sgd|depth_mup_adam)");
}

double Parametrization::gamma(Index width) const {
  if (kind == ParamKind::kNtp) return gamma0;
  return gamma0 * std::sqrt(static_cast<double>(width));
}

double Parametrization::alpha_effective() const {
  if (kind == ParamKind::kDepthMupSgd || kind == ParamKind::kDepthMupAdam) return 0.5;
  return alpha;
}

double Parametrization::learning_rate(Index width, Index depth) const {
  const double n = static_cast<double>(width);
  switch (kind) {
    case ParamKind::kNtp: return eta0;
    case ParamKind::kMup:
    case ParamKind::kDepthMupSgd: return eta0 * gamma0 * gamma0 * n;
    case ParamKind::kDepthMupAdam:
      return eta0 / std::sqrt(n * static_cast<double>(depth));
  }
  return eta0;
}

double Parametrization::hessian_scale(Index width) const {
  if (kind == ParamKind::kNtp) return gamma0 * gamma0;
  return gamma0 * gamma0 * static_cast<double>(width);
}

double Parametrization::nonresidual_lr_multiplier(Index depth) const {
  if (kind == ParamKind::kDepthMupAdam) return std::sqrt(static_cast<double>(depth));
  return 1.0;
}

}  // namespace mupscope::network
