#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mupscope/network/network.hpp"
#include "mupscope/spectral/spectral.hpp"
#include "mupscope/trainer/dataset.hpp"
#include "mupscope/trainer/optimizer.hpp"

namespace mupscope::trainer {

inline constexpr double kDivergenceThreshold = 1e12;

struct RunConfig {
  network::NetworkConfig network;
  DatasetSpec data;
  OptimizerConfig optim;
  network::Objective objective;
  int steps = 100;
  int spectral_every = 0;  // 0 disables spectral probes
  int log_every = 1;
  Index probe_batch_size = 32;
  std::uint64_t probe_batch_seed = 0;
  spectral::SpectralProbeConfig probes;
  std::uint64_t master_seed = 0;
  std::uint64_t seed = 0;  // init / data order
  Index run_index = 0;     // spectral probe stream
  std::string run_id = "r00000";

  /// Throws std::invalid_argument on inconsistent fields.
  void validate() const;
};

struct RunRow {
  int step = 0;
  double loss = 0.0;
  double lr_effective = 0.0;
  std::optional<spectral::SpectralSnapshot> snapshot;
};

struct RunRecord {
  std::string run_id;
  Index run_index = 0;
  std::string parametrization;
  Index width = 0;
  Index depth = 0;
  Index block_depth = 1;
  double lr = 0.0;  // eta0
  std::uint64_t seed = 0;
  bool diverged = false;
  std::vector<RunRow> rows;

  double final_loss() const;
};

/// Rows at step 0, every log_every steps and the final step; snapshots at
/// step 0, every spectral_every steps and the final step. A loss above
/// kDivergenceThreshold or non-finite stops the run with a final row whose
/// loss is +inf.
RunRecord train_run(const RunConfig& cfg);

/// Optional per-step observer used by tests: (step, params).
using StepObserver = std::function<void(int, const network::ParameterSet&)>;
RunRecord train_run(const RunConfig& cfg, const StepObserver& observer);

}  // namespace mupscope::trainer
