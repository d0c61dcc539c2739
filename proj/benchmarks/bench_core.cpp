#include <benchmark/benchmark.h>

#include "mupscope/network/network.hpp"
#include "mupscope/numerics/eigen.hpp"
#include "mupscope/numerics/rng.hpp"
#include "mupscope/spectral/spectral.hpp"
#include "mupscope/twolayer/twolayer.hpp"

namespace {

using namespace mupscope;

struct Fixture {
  network::NetworkConfig cfg;
  network::ParameterSet params;
  network::Batch batch;

  Fixture(Index width, Index depth, Index B) {
    cfg.width = width;
    cfg.depth = depth;
    cfg.input_dim = 16;
    params = network::init_network(cfg);
    numerics::RngStream rng(1, 1);
    batch.X.resize(B, cfg.input_dim);
    rng.fill_gaussian(batch.X);
    batch.Y.resize(B, 1);
    rng.fill_gaussian(batch.Y);
  }
};

void BM_Forward(benchmark::State& state) {
  const Fixture f(state.range(0), 3, 32);
  for (auto _ : state) benchmark::DoNotOptimize(network::forward(f.params, f.cfg, f.batch.X));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Forward)->RangeMultiplier(4)->Range(32, 512)->Complexity();

void BM_LossAndGrad(benchmark::State& state) {
  const Fixture f(state.range(0), 3, 32);
  for (auto _ : state) benchmark::DoNotOptimize(network::loss_and_grad(f.params, f.cfg, f.batch, {}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LossAndGrad)->RangeMultiplier(4)->Range(32, 512)->Complexity();

void BM_Hvp(benchmark::State& state) {
  const Fixture f(state.range(0), 3, 32);
  numerics::RngStream rng(2, 2);
  const Vector v = rng.gaussian_vector(f.params.size());
  for (auto _ : state) benchmark::DoNotOptimize(network::hvp(f.params, f.cfg, f.batch, {}, v));
}
BENCHMARK(BM_Hvp)->RangeMultiplier(4)->Range(32, 512);

void BM_PowerIterationTop1(benchmark::State& state) {
  const Fixture f(state.range(0), 3, 32);
  const auto op = spectral::preconditioned_hvp_operator(f.params, f.cfg, f.batch, {});
  for (auto _ : state) {
    numerics::RngStream rng(3, 3);
    benchmark::DoNotOptimize(numerics::power_iteration_top_k(op, f.params.size(), 1, rng));
  }
}
BENCHMARK(BM_PowerIterationTop1)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Hutchinson(benchmark::State& state) {
  const Fixture f(64, 3, 32);
  const auto op = spectral::preconditioned_hvp_operator(f.params, f.cfg, f.batch, {});
  for (auto _ : state) {
    numerics::RngStream rng(4, 4);
    benchmark::DoNotOptimize(spectral::hessian_trace_hutchinson(op, f.params.size(), static_cast<int>(state.range(0)), rng));
  }
}
BENCHMARK(BM_Hutchinson)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DenseSymEig(benchmark::State& state) {
  const Index n = state.range(0);
  numerics::RngStream rng(5, 5);
  Matrix m(n, n);
  rng.fill_gaussian(m);
  const Matrix s = m + m.transpose();
  for (auto _ : state) benchmark::DoNotOptimize(numerics::dense_sym_eig(s));
}
BENCHMARK(BM_DenseSymEig)->Arg(64)->Arg(320)->Unit(benchmark::kMillisecond);

void BM_LatentStep(benchmark::State& state) {
  const Index D = state.range(0);
  twolayer::LatentState s;
  s.w = Vector::Zero(D);
  s.e = Matrix::Identity(D, D) / static_cast<double>(D);
  s.v = 1.0 / static_cast<double>(D);
  const Vector w_star = Vector::Ones(D);
  for (auto _ : state) {
    s = twolayer::latent_step(s, w_star, 0.1, 1.0 / static_cast<double>(D));
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_LatentStep)->Arg(4)->Arg(16);

}  // namespace
BENCHMARK_MAIN();
