// Randomized invariant checks. Each property draws its cases from a small
// hand-rolled generator seeded per case, so a failure message names the case
// seed and can be replayed in isolation.
#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "mupscope/analysis/analysis.hpp"
#include "mupscope/cli/config.hpp"
#include "mupscope/cli/records.hpp"
#include "mupscope/network/network.hpp"
#include "mupscope/numerics/eigen.hpp"
#include "mupscope/numerics/fit.hpp"
#include "mupscope/numerics/rng.hpp"
#include "mupscope/spectral/spectral.hpp"
#include "mupscope/twolayer/twolayer.hpp"

namespace mupscope {
namespace {

// Deliberately independent of numerics::RngStream.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed * 0x9e3779b97f4a7c15ULL + 1) {}
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double log_real(double lo, double hi) { return std::exp(real(std::log(lo), std::log(hi))); }
  bool coin() { return integer(0, 1) == 1; }
  Vector vec(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal_(eng_);
    return v;
  }
  Matrix mat(Index r, Index c) {
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = normal_(eng_);
    return m;
  }
  // Symmetric PSD with well separated eigenvalues, so the default stopping
  // rule is meaningful.
  Matrix spd(Index n) {
    Eigen::HouseholderQR<Matrix> qr(mat(n, n));
    const Matrix q = qr.householderQ();
    Vector d(n);
    double lam = real(5.0, 20.0);
    for (Index i = 0; i < n; ++i) {
      d[i] = lam;
      lam *= real(0.2, 0.5);
    }
    return q * d.asDiagonal() * q.transpose();
  }
  std::uint64_t u64() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

constexpr int kCases = 40;

TEST(Property, PowerIterationNonincreasing) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(c);
    const Index n = g.integer(2, 12);
    const Matrix a = g.spd(n);
    numerics::RngStream rng(static_cast<std::uint64_t>(c), 1);
    const auto r = numerics::power_iteration_top_k([&](const Vector& v) { return Vector(a * v); }, n,
                                                   static_cast<int>(n), 2000, 1e-12, rng);
    for (std::size_t i = 1; i < r.size(); ++i) EXPECT_LE(r.eigenvalues[i], r.eigenvalues[i - 1] * (1 + 1e-9));
  }
}

TEST(Property, FullDeflationSumsToTrace) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(100 + c);
    const Index n = g.integer(2, 8);
    const Matrix a = g.spd(n);
    numerics::RngStream rng(static_cast<std::uint64_t>(c), 2);
    const auto r = numerics::power_iteration_top_k([&](const Vector& v) { return Vector(a * v); }, n,
                                                   static_cast<int>(n), 5000, 1e-14, rng);
    double sum = 0.0;
    for (double x : r.eigenvalues) sum += x;
    EXPECT_NEAR(sum, a.trace(), 1e-6 * a.trace());
  }
}

TEST(Property, DenseEigMatchesEigenSolver) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(200 + c);
    const Index n = g.integer(1, 10);
    const Matrix m = g.mat(n, n);
    const Matrix s = m + m.transpose();
    const auto mine = numerics::dense_sym_eig(s);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(s);
    for (Index i = 0; i < n; ++i)
      EXPECT_NEAR(mine.eigenvalues[static_cast<std::size_t>(i)], ref.eigenvalues()[n - 1 - i], 1e-10);
  }
}

TEST(Property, RngStreamIgnoresOtherStreams) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(300 + c);
    const std::uint64_t seed = g.u64(), id = g.u64();
    numerics::RngStream a(seed, id);
    std::vector<double> first;
    for (int i = 0; i < 20; ++i) first.push_back(a.gaussian());
    const int others = g.integer(1, 5);
    std::vector<numerics::RngStream> noise;
    for (int i = 0; i < others; ++i) {
      noise.emplace_back(seed, id + 1 + static_cast<std::uint64_t>(i));
      noise.back().gaussian();
    }
    numerics::RngStream b(seed, id);
    for (double x : first) EXPECT_EQ(b.gaussian(), x);
  }
}

TEST(Property, LoglogFitScaleEquivariant) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(400 + c);
    const int n = g.integer(3, 20);
    std::vector<double> t, y, yc;
    const double k = g.log_real(1e-3, 1e3);
    for (int i = 0; i < n; ++i) {
      t.push_back(1.0 + i + g.real(0.0, 0.5));
      y.push_back(g.log_real(1e-4, 1e4));
      yc.push_back(k * y.back());
    }
    const auto a = numerics::loglog_linfit(t, y);
    const auto b = numerics::loglog_linfit(t, yc);
    EXPECT_NEAR(b.a, k * a.a, 1e-9 * k * a.a);
    EXPECT_NEAR(b.beta, a.beta, 1e-12 * std::max(1.0, std::abs(a.beta)));
  }
}

network::NetworkConfig random_network(Gen& g) {
  network::NetworkConfig cfg;
  cfg.width = g.integer(2, 6);
  cfg.depth = g.integer(1, 3);
  cfg.block_depth = cfg.depth > 1 ? g.integer(1, 2) : 1;
  cfg.tau = cfg.block_depth > 1 || g.coin() ? 1 : 0;
  cfg.input_dim = g.integer(1, 4);
  cfg.num_classes = g.integer(1, 3);
  cfg.activation = g.coin() ? network::Activation::kRelu : network::Activation::kIdentity;
  cfg.parametrization.kind = g.coin() ? network::ParamKind::kMup : network::ParamKind::kNtp;
  cfg.parametrization.gamma0 = g.real(0.5, 2.0);
  cfg.seed = g.u64();
  return cfg;
}

network::Batch random_batch(Gen& g, const network::NetworkConfig& cfg, network::LossKind loss) {
  network::Batch b;
  const Index B = g.integer(1, 5);
  b.X = g.mat(B, cfg.input_dim);
  b.Y = g.mat(B, cfg.num_classes);
  for (Index i = 0; i < B; ++i) b.labels.push_back(g.integer(0, static_cast<int>(cfg.num_classes) - 1));
  (void)loss;
  return b;
}

TEST(Property, HvpSymmetric) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(500 + c);
    const auto cfg = random_network(g);
    network::Objective obj;
    obj.loss = cfg.num_classes > 1 && g.coin() ? network::LossKind::kCrossEntropy : network::LossKind::kMse;
    const auto b = random_batch(g, cfg, obj.loss);
    const auto p = network::init_network(cfg);
    const Vector v1 = g.vec(p.size()), v2 = g.vec(p.size());
    const double a = v1.dot(network::hvp(p, cfg, b, obj, v2));
    const double d = v2.dot(network::hvp(p, cfg, b, obj, v1));
    EXPECT_NEAR(a, d, 1e-4 * std::max({1.0, std::abs(a), std::abs(d)}));
  }
}

TEST(Property, DirectionalSharpnessBelowTop) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(600 + c);
    const Index n = g.integer(2, 10);
    const Matrix a = g.spd(n);
    const LinearOperator op = [&](const Vector& v) { return Vector(a * v); };
    const double top = numerics::dense_sym_eig(a).eigenvalues[0];
    EXPECT_LE(spectral::directional_sharpness(op, g.vec(n)), top * (1 + 1e-12));
  }
}

TEST(Property, NtkGramSpectrumMatchesOuter) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(700 + c);
    const Matrix k = g.mat(g.integer(1, 6), g.integer(1, 6));
    const auto small = numerics::dense_sym_eig(k * k.transpose());
    const auto big = numerics::dense_sym_eig(k.transpose() * k);
    const std::size_t r = std::min(small.size(), big.size());
    for (std::size_t i = 0; i < r; ++i) EXPECT_NEAR(small.eigenvalues[i], big.eigenvalues[i], 1e-8);
  }
}

TEST(Property, LatentFixedPoint) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(800 + c);
    const Index D = g.integer(1, 6);
    twolayer::LatentState s;
    s.w = g.vec(D);
    const Matrix m = g.mat(D, D);
    s.e = m * m.transpose();
    s.v = g.real(0.0, 3.0);
    const double eta0 = g.real(0.01, 1.0), kappa = g.real(0.1, 2.0);
    const auto next = twolayer::latent_step(s, s.w, eta0, kappa);
    EXPECT_EQ(next.w, s.w);
    EXPECT_EQ(next.e, s.e);
    EXPECT_EQ(next.v, s.v);
    const auto sp = twolayer::sp_latent_step(s, s.w, eta0);
    EXPECT_EQ(sp.w, s.w);
    EXPECT_EQ(sp.e, s.e);
  }
}

TEST(Property, LatentStatePreservesSymmetryAndSign) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(900 + c);
    twolayer::CaseStudyConfig cfg;
    cfg.D = g.integer(1, 5);
    cfg.N = g.integer(1, 64);
    cfg.scheme = g.coin() ? twolayer::Scheme::kMup : twolayer::Scheme::kNtp;
    cfg.eta0 = g.real(0.01, 0.5);
    cfg.w_star = g.vec(cfg.D);
    cfg.seed = g.u64();
    auto p = twolayer::init_two_layer(cfg);
    for (int t = 0; t < 20; ++t) p = twolayer::gd_step_params(p, cfg.w_star, cfg.eta0);
    const auto s = twolayer::project_latent(p);
    EXPECT_LE((s.e - s.e.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_GE(s.v, 0.0);
  }
}

TEST(Property, GnBoundAtRandomPoints) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(1000 + c);
    twolayer::CaseStudyConfig cfg;
    cfg.D = g.integer(1, 4);
    cfg.N = g.integer(1, 12);
    cfg.scheme = g.coin() ? twolayer::Scheme::kMup : twolayer::Scheme::kNtp;
    cfg.w_star = g.vec(cfg.D);
    cfg.seed = g.u64();
    const auto p = twolayer::init_two_layer(cfg);
    const auto blocks = twolayer::two_layer_hessian(p, cfg.w_star);
    const double h = numerics::dense_sym_eig(blocks.H_scaled).eigenvalues[0];
    const double ntk = numerics::dense_sym_eig(twolayer::ntk_latent(twolayer::project_latent(p))).eigenvalues[0];
    EXPECT_LE(std::abs(h - ntk), twolayer::residual_bound(p, cfg.w_star) + 1e-10);
  }
}

TEST(Property, DivergenceSignFlipInvariant) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(1100 + c);
    const int scales = g.integer(2, 4), n = g.integer(2, 8);
    std::vector<analysis::Series> a, b;
    for (int s = 0; s < scales; ++s) {
      analysis::Series x;
      x.scale = 8.0 * (s + 1);
      for (int i = 0; i < n; ++i) {
        x.steps.push_back(i * 5);
        x.values.push_back(g.real(-3, 3));
      }
      auto y = x;
      for (auto& v : y.values) v = -v;
      a.push_back(x);
      b.push_back(y);
    }
    const auto ga = analysis::divergence_series(a), gb = analysis::divergence_series(b);
    ASSERT_EQ(ga.size(), gb.size());
    for (std::size_t i = 0; i < ga.size(); ++i) {
      EXPECT_EQ(ga[i].values, gb[i].values);
      for (double v : ga[i].values) EXPECT_GE(v, 0.0);
    }
  }
}

TEST(Property, TransferInvariantUnderMonotoneMap) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(1200 + c);
    const int scales = g.integer(2, 4), n = g.integer(3, 12);
    std::vector<analysis::LrCurve> raw, mapped;
    for (int s = 0; s < scales; ++s) {
      analysis::LrCurve cur;
      cur.scale = 32.0 * (s + 1);
      for (int i = 0; i < n; ++i) {
        cur.lrs.push_back(0.01 * std::pow(1.5, i));
        cur.losses.push_back(g.integer(0, 9) == 0 ? std::numeric_limits<double>::infinity() : g.real(0, 5));
      }
      auto m = cur;
      for (auto& l : m.losses) l = std::log1p(l) * 3.0 + 7.0;
      raw.push_back(cur);
      mapped.push_back(m);
    }
    const auto a = analysis::optimal_lr(raw), b = analysis::optimal_lr(mapped);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].index, b[i].index);
    EXPECT_EQ(analysis::transfer_verdict(a).to_string(), analysis::transfer_verdict(b).to_string());
  }
}

TEST(Property, CsvDoublesRoundTrip) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(1300 + c);
    for (int i = 0; i < 50; ++i) {
      double x;
      const auto bits = g.u64();
      std::memcpy(&x, &bits, sizeof x);
      if (std::isnan(x)) continue;
      const double y = cli::parse_double(cli::format_double(x));
      EXPECT_EQ(y, x) << cli::format_double(x);
    }
  }
}

TEST(Property, ConfigRoundTrip) {
  for (int c = 0; c < kCases; ++c) {
    SCOPED_TRACE(::testing::Message() << "case seed " << c);
    Gen g(1400 + c);
    nlohmann::json doc;
    doc["seed"] = g.u64() >> 1;
    const bool adam = g.coin();
    const char* kind = adam ? (g.coin() ? "ntp" : "depth_mup_adam") : (g.coin() ? "mup" : "ntp");
    doc["network"] = {{"width", g.integer(1, 64)},
                      {"depth", g.integer(2, 5)},
                      {"input_dim", g.integer(1, 8)},
                      {"parametrization", kind},
                      {"gamma0", g.log_real(0.1, 10.0)},
                      {"eta0", g.log_real(1e-3, 1.0)}};
    doc["optim"] = {{"algo", adam ? "adam" : "sgd"}, {"steps", g.integer(1, 50)}, {"batch_size", 4}};
    doc["data"] = {{"count", g.integer(4, 64)}};
    doc["probes"] = {{"top_k", g.integer(1, 10)}, {"power_tol", g.log_real(1e-9, 1e-2)}};
    const auto cfg = cli::parse_config(doc);
    const auto j = cli::to_json(cfg);
    EXPECT_EQ(cli::to_json(cli::parse_config(j)).dump(), j.dump());
  }
}

}  // namespace
}  // namespace mupscope
