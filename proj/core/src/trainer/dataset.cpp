#include "mupscope/trainer/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mupscope/numerics/rng.hpp"

namespace mupscope::trainer {

namespace {
constexpr std::uint64_t kInputStream = 1;
constexpr std::uint64_t kTeacherStream = 2;
constexpr std::uint64_t kNoiseStream = 3;
constexpr std::uint64_t kProbeStream = 4;
}  // namespace

std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::kRegressionLinearTeacher: return "regression_linear_teacher";
    case DatasetKind::kClassificationSoftmaxTeacher: return "classification_softmax_teacher";
    case DatasetKind::kIdentityDesign: return "identity_design";
  }
  return "?";
}

DatasetKind dataset_kind_from_string(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "regression_linear_teacher" || s == "regression") return DatasetKind::kRegressionLinearTeacher;
  if (s == "classification_softmax_teacher" || s == "classification")
    return DatasetKind::kClassificationSoftmaxTeacher;
  if (s == "identity_design" || s == "identity") return DatasetKind::kIdentityDesign;
  throw std::invalid_argument("unknown dataset kind '" + std::string(name) + "'");
}

network::Batch make_dataset(const DatasetSpec& spec) {
  if (spec.input_dim < 1) throw std::invalid_argument("data.input_dim must be >= 1");
  if (spec.num_classes < 1) throw std::invalid_argument("data.num_classes must be >= 1");
  if (spec.noise_std < 0.0) throw std::invalid_argument("data.noise_std must be >= 0");
  if (!(spec.teacher_scale > 0.0)) throw std::invalid_argument("data.teacher_scale must be > 0");
  const Index D = spec.input_dim;
  const Index C = spec.num_classes;
  network::Batch out;

  if (spec.kind == DatasetKind::kIdentityDesign) {
    if (C != 1) throw std::invalid_argument("identity_design requires num_classes = 1");
    out.X = Matrix::Identity(D, D);
    Vector w = spec.w_star;
    if (w.size() == 0) {
      numerics::RngStream rng(spec.teacher_seed, kTeacherStream);
      w = spec.teacher_scale * rng.gaussian_vector(D);
    }
    if (w.size() != D) throw std::invalid_argument("data.w_star must have input_dim entries");
    out.Y = w;
    return out;
  }

  if (spec.count < 1) throw std::invalid_argument("data.count must be >= 1");
  const Index n = spec.count;
  numerics::RngStream xr(spec.teacher_seed, kInputStream);
  out.X.resize(n, D);
  xr.fill_gaussian(out.X);

  Matrix T(C, D);
  if (spec.w_star.size() > 0) {
    if (spec.w_star.size() != C * D)
      throw std::invalid_argument("data.w_star must have num_classes * input_dim entries");
    for (Index c = 0; c < C; ++c)
      for (Index d = 0; d < D; ++d) T(c, d) = spec.w_star[c * D + d];
  } else {
    numerics::RngStream tr(spec.teacher_seed, kTeacherStream);
    tr.fill_gaussian(T, spec.teacher_scale);
  }

  const Matrix logits = out.X * T.transpose() / std::sqrt(static_cast<double>(D));
  if (spec.kind == DatasetKind::kRegressionLinearTeacher) {
    out.Y = logits;
    if (spec.noise_std > 0.0) {
      numerics::RngStream nr(spec.teacher_seed, kNoiseStream);
      Matrix noise(n, C);
      nr.fill_gaussian(noise, spec.noise_std);
      out.Y += noise;
    }
  } else {
    if (C < 2) throw std::invalid_argument("classification requires num_classes >= 2");
    out.Y = Matrix::Zero(n, C);
    out.labels.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      Index arg = 0;
      logits.row(i).maxCoeff(&arg);
      out.labels[static_cast<std::size_t>(i)] = static_cast<int>(arg);
      out.Y(i, arg) = 1.0;
    }
  }
  return out;
}

network::Batch subset(const network::Batch& data, const std::vector<Index>& idx) {
  network::Batch out;
  const auto m = static_cast<Index>(idx.size());
  out.X.resize(m, data.X.cols());
  if (data.Y.size() > 0) out.Y.resize(m, data.Y.cols());
  for (Index r = 0; r < m; ++r) {
    const Index i = idx[static_cast<std::size_t>(r)];
    out.X.row(r) = data.X.row(i);
    if (data.Y.size() > 0) out.Y.row(r) = data.Y.row(i);
    if (!data.labels.empty()) out.labels.push_back(data.labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

network::Batch probe_batch(const network::Batch& data, Index size, std::uint64_t seed) {
  const Index n = data.size();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  numerics::RngStream rng(seed, kProbeStream);
  for (Index i = n - 1; i > 0; --i)
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1))]);
  perm.resize(static_cast<std::size_t>(std::min(size, n)));
  return subset(data, perm);
}

}  // namespace mupscope::trainer
