#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mupscope/network/network.hpp"

namespace mupscope::trainer {

enum class DatasetKind { kRegressionLinearTeacher, kClassificationSoftmaxTeacher, kIdentityDesign };

std::string_view to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(std::string_view name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kRegressionLinearTeacher;
  Index count = 256;
  Index input_dim = 8;
  Index num_classes = 1;
  std::uint64_t teacher_seed = 0;
  double noise_std = 0.0;
  // Multiplies a teacher drawn from teacher_seed; ignored with explicit w_star.
  double teacher_scale = 1.0;
  // Optional teacher for regression (num_classes x input_dim, row-major) or
  // the target of identity_design. Drawn from teacher_seed when empty.
  Vector w_star;
};

/// regression:      x ~ N(0, I_D), y = W* x / sqrt(D) + noise_std * N(0, 1)
/// classification:  x ~ N(0, I_D), label = argmax_c (T x)_c with T ~ N(0, 1);
///                  Y holds the one-hot encoding
/// identity_design: X = I_D, Y = w_star (count is forced to D)
network::Batch make_dataset(const DatasetSpec& spec);

/// Rows `idx` of a batch.
network::Batch subset(const network::Batch& data, const std::vector<Index>& idx);

/// First `size` examples of a permutation drawn from `seed`.
network::Batch probe_batch(const network::Batch& data, Index size, std::uint64_t seed);

}  // namespace mupscope::trainer
