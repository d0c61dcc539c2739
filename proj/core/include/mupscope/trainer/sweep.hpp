#pragma once

#include <cstdint>
#include <vector>

#include "mupscope/trainer/train.hpp"

namespace mupscope::trainer {

struct SweepSpec {
  std::vector<network::ParamKind> parametrizations;
  std::vector<Index> block_depths;
  std::vector<Index> depths;
  std::vector<Index> widths;
  std::vector<std::uint64_t> seeds;
  std::vector<double> lrs;  // eta0 values

  /// Throws std::invalid_argument on an empty axis.
  void validate() const;
  std::size_t size() const;
};

/// Cartesian product in the order parametrization, block_depth, depth, width,
/// seed, lr (lr fastest). Run ids are zero-padded indices.
std::vector<RunConfig> expand_grid(const RunConfig& base, const SweepSpec& spec);

/// Runs every config on `parallelism` worker threads. The result is ordered
/// by run index and independent of the worker count.
std::vector<RunRecord> run_all(const std::vector<RunConfig>& runs, int parallelism);

std::vector<RunRecord> sweep_grid(const RunConfig& base, const SweepSpec& spec, int parallelism);

/// n log-spaced values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int n);

}  // namespace mupscope::trainer
