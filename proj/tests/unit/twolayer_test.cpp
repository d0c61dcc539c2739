#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <cmath>

#include "mupscope/numerics/eigen.hpp"
#include "mupscope/numerics/rng.hpp"
#include "mupscope/twolayer/twolayer.hpp"

using namespace mupscope;
using namespace mupscope::twolayer;

namespace {

CaseStudyConfig make_cfg(Scheme s, Index N, Index D, double eta0, std::uint64_t seed = 1) {
  CaseStudyConfig c;
  c.scheme = s;
  c.N = N;
  c.D = D;
  c.eta0 = eta0;
  c.seed = seed;
  numerics::RngStream rng(seed, 99);
  c.w_star = rng.gaussian_vector(D);
  return c;
}

double max_abs_diff(const LatentState& a, const LatentState& b) {
  double m = (a.w - b.w).cwiseAbs().maxCoeff();
  m = std::max(m, (a.e - b.e).cwiseAbs().maxCoeff());
  return std::max(m, std::abs(a.v - b.v));
}

// Loss written out from scratch for the finite-difference Hessian oracle.
double loss_of(const Vector& theta, Index D, Index N, double c, const Vector& w_star) {
  Vector w = Vector::Zero(D);
  for (Index i = 0; i < D; ++i)
    for (Index j = 0; j < N; ++j) w[i] += theta[i * N + j] * theta[D * N + j];
  return 0.5 * (c * w - w_star).squaredNorm();
}

}  // namespace

TEST(TwoLayerInit, Deterministic) {
  const auto cfg = make_cfg(Scheme::kMup, 4, 2, 0.1, 7);
  const auto a = init_two_layer(cfg), b = init_two_layer(cfg);
  EXPECT_EQ(a.E, b.E);
  EXPECT_EQ(a.V, b.V);
  EXPECT_DOUBLE_EQ(a.gamma, 2.0);
}

TEST(TwoLayerInit, SpAndNtpVariances) {
  // Monte-Carlo over 1e5 entries: SP Var[E_ij] = 1/D, NTP Var[V_j] = 1.
  auto cfg = make_cfg(Scheme::kSp, 1000, 4, 0.1, 3);
  cfg.N = 25000;
  const auto p = init_two_layer(cfg);
  const double n = static_cast<double>(p.E.size());
  const double var = p.E.squaredNorm() / n;
  EXPECT_NEAR(var, 0.25, 3.0 * 0.25 * std::sqrt(2.0 / n));

  auto ntp = make_cfg(Scheme::kNtp, 100000, 1, 0.1, 4);
  const auto q = init_two_layer(ntp);
  const double m = static_cast<double>(q.V.size());
  EXPECT_NEAR(q.V.squaredNorm() / m, 1.0, 3.0 * std::sqrt(2.0 / m));
}

TEST(ProjectLatent, Examples) {
  TwoLayerParams p;
  p.E = Matrix::Zero(2, 3);
  p.V = Vector::Zero(3);
  p.gamma = 1.0;
  auto s = project_latent(p);
  EXPECT_EQ(s.w.norm(), 0.0);
  EXPECT_EQ(s.e.norm(), 0.0);
  EXPECT_EQ(s.v, 0.0);

  p.E = Matrix::Ones(1, 2);
  p.V = Vector::Ones(2);
  p.gamma = std::sqrt(2.0);
  s = project_latent(p);
  EXPECT_NEAR(s.w[0], 1.0, 1e-15);
  EXPECT_NEAR(s.e(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(s.v, 1.0, 1e-15);
}

TEST(GdStep, StationaryAndZeroRate) {
  const auto cfg = make_cfg(Scheme::kMup, 6, 3, 0.3);
  auto p = init_two_layer(cfg);
  const Vector w = project_latent(p).w;
  auto q = gd_step_params(p, w, 0.3);
  EXPECT_EQ(q.E, p.E);
  EXPECT_EQ(q.V, p.V);
  q = gd_step_params(p, cfg.w_star, 0.0);
  EXPECT_EQ(q.E, p.E);
  EXPECT_EQ(q.V, p.V);
}

TEST(GdStep, MatchesLatentStep) {
  for (Scheme s : {Scheme::kMup, Scheme::kNtp}) {
    const auto cfg = make_cfg(s, 4, 2, 0.4, 11);
    const auto p = init_two_layer(cfg);
    const auto next = project_latent(gd_step_params(p, cfg.w_star, cfg.eta0));
    const auto lat = latent_step(project_latent(p), cfg.w_star, cfg.eta0, p.gamma, 4, 2);
    EXPECT_LE(max_abs_diff(next, lat), 1e-10);
  }
}

TEST(GdStep, DivergenceReported) {
  auto cfg = make_cfg(Scheme::kNtp, 4, 2, 1e200);
  auto p = init_two_layer(cfg);
  EXPECT_THROW(
      {
        for (int i = 0; i < 10; ++i) p = gd_step_params(p, cfg.w_star, cfg.eta0);
      },
      DivergenceError);
}

TEST(LatentStep, HandExample) {
  LatentState s;
  s.w = Vector::Zero(1);
  s.e = Matrix::Ones(1, 1);
  s.v = 1.0;
  const Vector w_star = Vector::Ones(1);
  // r = -1: w+ = 0 - 0.1 * 2 * (-1) + 0 = 0.2; e+ = 1 + 0.01 = 1.01; v+ = 1 + 0.01 = 1.01.
  const auto n = latent_step(s, w_star, 0.1, 1.0);
  EXPECT_NEAR(n.w[0], 0.2, 1e-15);
  EXPECT_NEAR(n.e(0, 0), 1.01, 1e-15);
  EXPECT_NEAR(n.v, 1.01, 1e-15);
}

TEST(LatentStep, FixedPoint) {
  LatentState s;
  s.w = Vector::LinSpaced(3, -1.0, 2.0);
  s.e = Matrix::Identity(3, 3) * 0.7;
  s.v = 0.4;
  const auto n = latent_step(s, s.w, 0.9, 0.5);
  EXPECT_EQ(n.w, s.w);
  EXPECT_EQ(n.e, s.e);
  EXPECT_EQ(n.v, s.v);
  const auto m = sp_latent_step(s, s.w, 0.2);
  EXPECT_EQ(m.w, s.w);
  EXPECT_EQ(m.e, s.e);
}

TEST(LatentStep, LinearLimit) {
  LatentState s;
  s.w = Vector::Constant(2, 0.3);
  s.e = Matrix::Identity(2, 2) * 0.5;
  s.e(0, 1) = s.e(1, 0) = 0.1;
  s.v = 0.5;
  Vector w_star(2);
  w_star << 1.0, -1.0;
  const auto n = latent_step(s, w_star, 0.2, 0.0);
  EXPECT_EQ(n.e, s.e);
  EXPECT_EQ(n.v, s.v);
  Matrix theta = s.e;
  theta.diagonal().array() += s.v;
  const Vector expect = s.w - 0.2 * theta * (s.w - w_star);
  EXPECT_LE((n.w - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LatentStep, DriftIsAnError) {
  LatentState s;
  s.w = Vector::Zero(2);
  s.e = Matrix::Identity(2, 2);
  s.e(0, 1) = 1e-3;  // asymmetric input
  s.v = 1.0;
  EXPECT_THROW(latent_step(s, Vector::Ones(2), 0.1, 0.5), std::runtime_error);
}

TEST(SpLatent, MatchesParameterStep) {
  const auto cfg = make_cfg(Scheme::kSp, 16, 3, 0.05, 5);
  const auto p = init_two_layer(cfg);
  const auto next = project_latent(gd_step_params(p, cfg.w_star, cfg.eta0));
  const auto lat = sp_latent_step(project_latent(p), cfg.w_star, cfg.eta0);
  EXPECT_LE(max_abs_diff(next, lat), 1e-10);
}

TEST(SpLatent, InitDiagonalMean) {
  // E[e_ii] = N/D = 16 at N=64, D=4 over 1e4 seeds.
  const auto rep = init_moment_check(Scheme::kSp, 64, 4, 10000, 17);
  const auto& e = rep.get("e_00");
  EXPECT_NEAR(e.target_mean, 16.0, 1e-15);
  EXPECT_LE(e.mean_z(), 3.0);
}

TEST(NtkLatent, Examples) {
  LatentState s;
  s.w = Vector::Zero(2);
  s.e = Matrix::Identity(2, 2) * 0.5;
  s.v = 0.5;
  const Matrix t = ntk_latent(s);
  EXPECT_TRUE(t.isApprox(Matrix::Identity(2, 2)));
  s.e.setZero();
  s.v = 0.0;
  EXPECT_EQ(ntk_latent(s).norm(), 0.0);
}

TEST(NtkLatent, MatchesGram) {
  const auto cfg = make_cfg(Scheme::kMup, 12, 3, 0.1, 21);
  const auto p = init_two_layer(cfg);
  const double nd = 36.0;
  Matrix direct = p.E * p.E.transpose() / nd;
  direct.diagonal().array() += p.V.squaredNorm() / nd;
  EXPECT_LE((ntk_latent(project_latent(p)) - direct).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix K = two_layer_jacobian(p);
  EXPECT_LE((K * K.transpose() - direct).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Hessian, MatchesFiniteDifferenceOracle) {
  for (Scheme s : {Scheme::kMup, Scheme::kNtp, Scheme::kSp}) {
    const auto cfg = make_cfg(s, 5, 2, 0.1, 31);
    const auto p = init_two_layer(cfg);
    const Index D = 2, N = 5, P = N * (D + 1);
    const double c = s == Scheme::kSp ? 1.0 : 1.0 / (p.gamma * std::sqrt(10.0));
    const double g2 = s == Scheme::kSp ? 1.0 : p.gamma * p.gamma;
    Vector theta(P);
    for (Index i = 0; i < D; ++i)
      for (Index j = 0; j < N; ++j) theta[i * N + j] = p.E(i, j);
    theta.tail(N) = p.V;
    const double h = 1e-4;
    Matrix fd(P, P);
    for (Index a = 0; a < P; ++a)
      for (Index b = 0; b < P; ++b) {
        Vector pp = theta, pm = theta, mp = theta, mm = theta;
        pp[a] += h, pp[b] += h;
        pm[a] += h, pm[b] -= h;
        mp[a] -= h, mp[b] += h;
        mm[a] -= h, mm[b] -= h;
        fd(a, b) = g2 *
                   (loss_of(pp, D, N, c, cfg.w_star) - loss_of(pm, D, N, c, cfg.w_star) -
                    loss_of(mp, D, N, c, cfg.w_star) + loss_of(mm, D, N, c, cfg.w_star)) /
                   (4 * h * h);
      }
    const auto hb = two_layer_hessian(p, cfg.w_star);
    EXPECT_LE((hb.H_scaled - fd).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
    EXPECT_LE((hb.G + hb.R - hb.H_scaled).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Hessian, ResidualExtremes) {
  const auto cfg = make_cfg(Scheme::kMup, 7, 3, 0.1, 41);
  const auto p = init_two_layer(cfg);
  const auto hb = two_layer_hessian(p, cfg.w_star);
  const auto r = numerics::dense_sym_eig(hb.R);
  const double bound = residual_bound(p, cfg.w_star);
  const Vector w = project_latent(p).w;
  EXPECT_NEAR(bound, std::sqrt(p.gamma * p.gamma / 21.0) * (w - cfg.w_star).norm(), 1e-12);
  EXPECT_NEAR(r.eigenvalues.front(), bound, 1e-8);
  EXPECT_NEAR(r.eigenvalues.back(), -bound, 1e-8);
}

TEST(Hessian, AtMinimizerEqualsNtk) {
  const auto cfg = make_cfg(Scheme::kMup, 6, 2, 0.1, 51);
  const auto p = init_two_layer(cfg);
  const Vector w = project_latent(p).w;
  const auto hb = two_layer_hessian(p, w);
  EXPECT_EQ(hb.R.cwiseAbs().maxCoeff(), 0.0);
  const double top = numerics::dense_sym_eig(hb.H_scaled).eigenvalues.front();
  const double ntk = numerics::dense_sym_eig(ntk_latent(project_latent(p))).eigenvalues.front();
  EXPECT_NEAR(top, ntk, 1e-12 * std::max(1.0, ntk));
}

TEST(Hessian, GnSpectrumEqualsNtkSpectrum) {
  const auto cfg = make_cfg(Scheme::kNtp, 9, 3, 0.1, 61);
  const auto p = init_two_layer(cfg);
  const auto hb = two_layer_hessian(p, cfg.w_star);
  const auto g = numerics::dense_sym_eig(hb.G);
  // Oracle: singular values of K squared.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(two_layer_jacobian(p)));
  for (Index i = 0; i < 3; ++i)
    EXPECT_NEAR(g.eigenvalues[static_cast<std::size_t>(i)], svd.singularValues()[i] * svd.singularValues()[i], 1e-8);
  for (std::size_t i = 3; i < g.size(); ++i) EXPECT_NEAR(g.eigenvalues[i], 0.0, 1e-8);
}

TEST(Hessian, GnBoundHolds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto cfg = make_cfg(seed % 2 ? Scheme::kMup : Scheme::kNtp, 8, 3, 0.1, seed);
    const auto p = init_two_layer(cfg);
    const auto hb = two_layer_hessian(p, cfg.w_star);
    const double h = numerics::dense_sym_eig(hb.H_scaled).eigenvalues.front();
    const double t = numerics::dense_sym_eig(ntk_latent(project_latent(p))).eigenvalues.front();
    EXPECT_LE(std::abs(h - t), residual_bound(p, cfg.w_star) + 1e-10);
  }
}

TEST(Hessian, BudgetEnforced) {
  auto cfg = make_cfg(Scheme::kMup, 2001, 1, 0.1);
  const auto p = init_two_layer(cfg);
  EXPECT_THROW(two_layer_hessian(p, cfg.w_star), std::length_error);
}

TEST(EosInterval, Examples) {
  Vector w(4);
  w << 1, 1, 1, 1;
  const auto iv = eos_interval(0.5, std::sqrt(64.0), 64, 4, w);
  EXPECT_NEAR(iv.lo, 4.0, 1e-14);
  EXPECT_NEAR(iv.hi, 4.5, 1e-14);
  const auto z = eos_interval(0.5, 1.0, 10, 2, Vector::Zero(2));
  EXPECT_EQ(z.lo, z.hi);
  const auto big = eos_interval(0.5, 1.0, 1 << 20, 2, Vector::Ones(2));
  EXPECT_NEAR(big.hi, big.lo, 1e-6);
  EXPECT_THROW(eos_interval(0.0, 1.0, 1, 1, w), std::invalid_argument);
}

TEST(LatentJacobian, ZeroStepIsIdentity) {
  const auto cfg = make_cfg(Scheme::kMup, 8, 2, 0.1, 3);
  const auto s = project_latent(init_two_layer(cfg));
  const auto mags = latent_jacobian_spectrum(s, cfg.w_star, 0.0, 0.5);
  ASSERT_EQ(mags.size(), 7u);
  for (double m : mags) EXPECT_EQ(m, 1.0);
}

TEST(LatentJacobian, StableAtMinimizerForSmallStep) {
  LatentState s;
  s.w = Vector::Ones(2);
  s.e = Matrix::Identity(2, 2) * 0.5;
  s.v = 0.5;
  const auto mags = latent_jacobian_spectrum(s, s.w, 0.05, 0.5);
  EXPECT_LE(mags.front(), 1.0 + 1e-6);
  int unit = 0;
  for (double m : mags) unit += std::abs(m - 1.0) < 1e-6;
  EXPECT_GE(unit, 5);  // D^2 + 1
  EXPECT_TRUE(is_marginally_stable(mags));
}

TEST(Moments, MupTargets) {
  const auto rep = init_moment_check(Scheme::kMup, 256, 4, 10000, 2024);
  EXPECT_LE(rep.get("v").mean_z(), 3.0);
  EXPECT_LE(rep.get("e_00").var_z(), 3.0);
  EXPECT_LE(rep.get("e_01").var_z(), 3.0);
  EXPECT_LE(rep.get("w_0").var_z(), 3.0);
  EXPECT_NEAR(rep.get("w_0").target_var, 1.0 / 1024.0, 1e-18);
}

TEST(Moments, NtpWeightVariance) {
  const auto rep = init_moment_check(Scheme::kNtp, 64, 4, 5000, 5);
  EXPECT_NEAR(rep.get("w_0").target_var, 0.25, 1e-15);
  EXPECT_LE(rep.get("w_0").var_z(), 3.0);
}

TEST(Moments, RejectsFewTrials) {
  EXPECT_THROW(init_moment_check(Scheme::kMup, 4, 2, 99, 0), std::invalid_argument);
}
