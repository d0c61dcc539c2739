#pragma once

#include <string_view>

#include "mupscope/numerics/types.hpp"

namespace mupscope::network {

enum class ParamKind { kNtp, kMup, kDepthMupSgd, kDepthMupAdam };

std::string_view to_string(ParamKind k);
/// "ntp", "mup", "depth_mup_sgd", "depth_mup_adam". Throws std::invalid_argument.
ParamKind param_kind_from_string(std::string_view name);

/// Width/depth scaling recipe.
///
///   kind            gamma          lr                       alpha
///   ntp             g0             eta0                     user
///   mup             g0 sqrt(N)     eta0 gamma^2             user
///   depth_mup_sgd   g0 sqrt(N)     eta0 gamma^2             1/2
///   depth_mup_adam  g0 sqrt(N)     eta0 N^-1/2 L^-1/2       1/2
///
/// For depth_mup_adam the first and last layers additionally get a sqrt(L)
/// learning-rate multiplier.
struct Parametrization {
  ParamKind kind = ParamKind::kMup;
  double gamma0 = 1.0;
  double alpha = 0.0;
  double eta0 = 0.1;

  double gamma(Index width) const;
  double alpha_effective() const;
  double learning_rate(Index width, Index depth) const;
  /// Multiplier turning the raw Hessian into the reported one: gamma^2
  /// (gamma0^2 for ntp).
  double hessian_scale(Index width) const;
  double nonresidual_lr_multiplier(Index depth) const;
  bool is_adam_native() const { return kind == ParamKind::kDepthMupAdam; }
};

}  // namespace mupscope::network
