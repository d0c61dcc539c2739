#pragma once

#include <cstdint>
#include <random>

#include "mupscope/numerics/types.hpp"

namespace mupscope::numerics {

/// SplitMix64 finalizer; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Deterministic random stream keyed by (master_seed, stream_id).
///
/// Two streams with the same key produce identical draws no matter how many
/// other streams exist. Streams are not thread-safe; each worker derives its
/// own.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  double gaussian();
  double rademacher();
  double uniform();
  std::uint64_t next_u64();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Vector gaussian_vector(Index n, double stddev = 1.0);
  Vector rademacher_vector(Index n);
  /// Fills any dense expression row by row.
  template <class M>
  void fill_gaussian(M&& m, double stddev = 1.0) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = stddev * gaussian();
  }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

RngStream derive_rng_stream(std::uint64_t master_seed, std::uint64_t stream_id);

}  // namespace mupscope::numerics
