#include "mupscope/trainer/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mupscope/numerics/rng.hpp"

namespace mupscope::trainer {

namespace {
constexpr std::uint64_t kBatchStream = 11;
}  // namespace

void RunConfig::validate() const {
  network.validate();
  if (steps < 0) throw std::invalid_argument("optim.steps must be >= 0");
  if (spectral_every < 0) throw std::invalid_argument("probes.spectral_every must be >= 0");
  if (log_every < 1) throw std::invalid_argument("probes.log_every must be >= 1");
  if (probe_batch_size < 1) throw std::invalid_argument("probes.probe_batch_size must be >= 1");
  if (!(network.parametrization.eta0 >= 0.0) || !std::isfinite(network.parametrization.eta0))
    throw std::invalid_argument("learning rate must be finite and >= 0");
  if (optim.warmup_steps < 0) throw std::invalid_argument("optim.warmup_steps must be >= 0");
  if (optim.batch_size < 0) throw std::invalid_argument("optim.batch_size must be >= 0");
  if (data.input_dim != network.input_dim)
    throw std::invalid_argument("data.input_dim does not match the network input dimension");
  if (data.num_classes != network.num_classes)
    throw std::invalid_argument("data.num_classes does not match the network output dimension");
  if (objective.loss == network::LossKind::kCrossEntropy &&
      data.kind != DatasetKind::kClassificationSoftmaxTeacher)
    throw std::invalid_argument("cross_entropy loss requires a classification dataset");
  const auto kind = network.parametrization.kind;
  if (optim.algo == Algo::kAdam &&
      (kind == network::ParamKind::kMup || kind == network::ParamKind::kDepthMupSgd))
    throw std::invalid_argument("adam is only supported with depth_mup_adam or ntp");
  if (optim.algo == Algo::kSgd && kind == network::ParamKind::kDepthMupAdam)
    throw std::invalid_argument("depth_mup_adam requires optim.algo = adam");
  if (probes.top_k < 1) throw std::invalid_argument("probes.top_k must be >= 1");
  if (probes.power_iter_max < 1) throw std::invalid_argument("probes.power_iter_max must be >= 1");
  if (!(probes.power_tol > 0.0)) throw std::invalid_argument("probes.power_tol must be > 0");
  if (probes.hutchinson_probes < 1)
    throw std::invalid_argument("probes.hutchinson_probes must be >= 1");
}

double RunRecord::final_loss() const {
  return rows.empty() ? std::numeric_limits<double>::quiet_NaN() : rows.back().loss;
}

RunRecord train_run(const RunConfig& cfg) { return train_run(cfg, nullptr); }

RunRecord train_run(const RunConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  const network::NetworkConfig& net = cfg.network;
  const network::Batch data = make_dataset(cfg.data);
  const Index n = data.size();
  const Index B = (cfg.optim.batch_size == 0 || cfg.optim.batch_size >= n) ? n : cfg.optim.batch_size;
  const Index per_epoch = n / B;
  const bool full_batch = B == n;

  const bool probing = cfg.spectral_every > 0;
  network::Batch probe;
  if (probing) probe = probe_batch(data, cfg.probe_batch_size, cfg.probe_batch_seed);
  numerics::RngStream probe_rng(cfg.master_seed, static_cast<std::uint64_t>(cfg.run_index));

  network::ParameterSet params = network::init_network(net);
  const Vector lr_diag = lr_diagonal(params, net, cfg.optim);
  const double lr_nominal = nominal_lr(net, cfg.optim);
  OptimizerState state = init_optimizer_state(params.size());

  RunRecord rec;
  rec.run_id = cfg.run_id;
  rec.run_index = cfg.run_index;
  rec.parametrization = std::string(network::to_string(net.parametrization.kind));
  rec.width = net.width;
  rec.depth = net.depth;
  rec.block_depth = net.block_depth;
  rec.lr = net.parametrization.eta0;
  rec.seed = cfg.seed;

  const bool adam = cfg.optim.algo == Algo::kAdam;
  auto snapshot = [&](int step) {
    spectral::AdamPreconditioner pre;
    if (adam) {
      pre.lr_diag = lr_diag * warmup_factor(std::max<long>(state.t, 1), cfg.optim.warmup_steps);
      if (state.t >= 1) {
        pre.p_diag = adam_preconditioner(state, cfg.optim);
      } else {
        // Preconditioner the first update would use.
        OptimizerState first = state;
        const Vector g = network::loss_and_grad(params, net, probe, cfg.objective).grad;
        first.t = 1;
        first.nu = (1.0 - cfg.optim.beta2) * g.cwiseProduct(g);
        pre.p_diag = adam_preconditioner(first, cfg.optim);
      }
    }
    return spectral::take_snapshot(step, params, net, probe, cfg.objective, cfg.probes, probe_rng,
                                   adam ? &pre : nullptr);
  };

  auto diverged = [](double loss) {
    return !std::isfinite(loss) || std::abs(loss) > kDivergenceThreshold;
  };
  auto mark_diverged = [&](int step, double lr_eff) {
    RunRow row;
    row.step = step;
    row.loss = std::numeric_limits<double>::infinity();
    row.lr_effective = lr_eff;
    rec.rows.push_back(std::move(row));
    rec.diverged = true;
  };

  {
    RunRow row;
    row.step = 0;
    row.loss = network::loss_value(params, net, data, cfg.objective);
    row.lr_effective = lr_nominal * warmup_factor(0, cfg.optim.warmup_steps);
    if (diverged(row.loss)) {
      mark_diverged(0, row.lr_effective);
      return rec;
    }
    if (probing) row.snapshot = snapshot(0);
    rec.rows.push_back(std::move(row));
  }

  std::vector<Index> perm(static_cast<std::size_t>(n));
  network::Batch minibatch;
  for (int t = 1; t <= cfg.steps; ++t) {
    const network::Batch* batch = &data;
    if (!full_batch) {
      const long epoch = (t - 1) / per_epoch;
      const Index pos = (t - 1) % per_epoch;
      if (pos == 0) {
        std::iota(perm.begin(), perm.end(), Index{0});
        numerics::RngStream rng(numerics::mix_seed(net.seed, static_cast<std::uint64_t>(epoch)),
                                kBatchStream);
        for (Index i = n - 1; i > 0; --i)
          std::swap(perm[static_cast<std::size_t>(i)],
                    perm[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1))]);
      }
      std::vector<Index> idx(perm.begin() + pos * B, perm.begin() + (pos + 1) * B);
      minibatch = subset(data, idx);
      batch = &minibatch;
    }

    const network::LossGrad lg = network::loss_and_grad(params, net, *batch, cfg.objective);
    const double lr_eff = lr_nominal * warmup_factor(state.t + 1, cfg.optim.warmup_steps);
    if (!lg.finite || diverged(lg.loss)) {
      mark_diverged(t, lr_eff);
      break;
    }
    bool finite = true;
    optimizer_step(state, params.flat(), lg.grad, lr_diag, cfg.optim, finite);
    if (!finite) {
      mark_diverged(t, lr_eff);
      break;
    }
    if (observer) observer(t, params);

    const bool snap_due = probing && (t % cfg.spectral_every == 0 || t == cfg.steps);
    if (t % cfg.log_every == 0 || t == cfg.steps || snap_due) {
      RunRow row;
      row.step = t;
      row.loss = network::loss_value(params, net, data, cfg.objective);
      row.lr_effective = lr_eff;
      if (diverged(row.loss)) {
        mark_diverged(t, lr_eff);
        break;
      }
      if (snap_due) {
        try {
          row.snapshot = snapshot(t);
        } catch (const DivergenceError&) {
          mark_diverged(t, lr_eff);
          break;
        }
      }
      rec.rows.push_back(std::move(row));
    }
  }
  return rec;
}

}  // namespace mupscope::trainer
