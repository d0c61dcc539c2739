#include "mupscope/trainer/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <optional>
#include <stdexcept>
#include <thread>

#include "mupscope/numerics/rng.hpp"

namespace mupscope::trainer {

void SweepSpec::validate() const {
  auto need = [](bool empty, const char* axis) {
    if (empty) throw std::invalid_argument(std::string("sweep.") + axis + " must not be empty");
  };
  need(parametrizations.empty(), "parametrizations");
  need(block_depths.empty(), "block_depths");
  need(depths.empty(), "depths");
  need(widths.empty(), "widths");
  need(seeds.empty(), "seeds");
  need(lrs.empty(), "lrs");
}

std::size_t SweepSpec::size() const {
  return parametrizations.size() * block_depths.size() * depths.size() * widths.size() *
         seeds.size() * lrs.size();
}

std::vector<RunConfig> expand_grid(const RunConfig& base, const SweepSpec& spec) {
  spec.validate();
  std::vector<RunConfig> out;
  out.reserve(spec.size());
  Index index = 0;
  for (auto kind : spec.parametrizations)
    for (Index k : spec.block_depths)
      for (Index L : spec.depths)
        for (Index N : spec.widths)
          for (std::uint64_t seed : spec.seeds)
            for (double lr : spec.lrs) {
              RunConfig rc = base;
              rc.network.parametrization.kind = kind;
              rc.network.parametrization.eta0 = lr;
              rc.network.block_depth = k;
              rc.network.depth = L;
              rc.network.width = N;
              rc.seed = seed;
              rc.network.seed = numerics::mix_seed(base.master_seed, seed);
              rc.run_index = index;
              char buf[32];
              std::snprintf(buf, sizeof buf, "r%05ld", static_cast<long>(index));
              rc.run_id = buf;
              out.push_back(std::move(rc));
              ++index;
            }
  return out;
}

std::vector<RunRecord> run_all(const std::vector<RunConfig>& runs, int parallelism) {
  for (const auto& r : runs) r.validate();
  std::vector<std::optional<RunRecord>> slots(runs.size());
  std::vector<std::exception_ptr> errors(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      try {
        slots[i] = train_run(runs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(parallelism, static_cast<int>(runs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<RunRecord> out;
  out.reserve(runs.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  std::sort(out.begin(), out.end(),
            [](const RunRecord& a, const RunRecord& b) { return a.run_index < b.run_index; });
  return out;
}

std::vector<RunRecord> sweep_grid(const RunConfig& base, const SweepSpec& spec, int parallelism) {
  return run_all(expand_grid(base, spec), parallelism);
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > 0.0) || n < 1) throw std::invalid_argument("log_grid: need lo, hi > 0 and n >= 1");
  if (n == 1) return {lo};
  std::vector<double> g(static_cast<std::size_t>(n));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

}  // namespace mupscope::trainer
