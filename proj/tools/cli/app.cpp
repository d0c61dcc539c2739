#include "mupscope/cli/app.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "mupscope/cli/config.hpp"
#include "mupscope/cli/records.hpp"
#include "mupscope/cli/report.hpp"
#include "mupscope/numerics/rng.hpp"
#include "mupscope/numerics/types.hpp"
#include "mupscope/version.hpp"

namespace mupscope::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool force = false;
  std::string runs;
};

int resolve_jobs(const Options& o) {
  if (o.jobs) {
    if (*o.jobs < 1) throw ConfigError("--jobs: must be >= 1");
    return *o.jobs;
  }
  if (const char* env = std::getenv("MUPSCOPE_JOBS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError(std::string("MUPSCOPE_JOBS: invalid value '") + env + "'");
    return static_cast<int>(v);
  }
  return 1;
}

ExperimentConfig require_config(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config: required for this command");
  return load_config(o.config, o.seed ? &*o.seed : nullptr);
}

fs::path prepare_out(const Options& o, const std::vector<std::string>& products) {
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir.string() + ": " + ec.message());
  if (!o.force)
    for (const auto& p : products)
      if (fs::exists(dir / p))
        throw ConfigError("--out: " + (dir / p).string() + " exists (use --force to overwrite)");
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(path.string() + ": cannot write");
  f << text;
  if (!f) throw std::runtime_error(path.string() + ": write failed");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

void emit_records(const fs::path& dir, const ExperimentConfig& cfg,
                  const std::vector<trainer::RunRecord>& recs) {
  std::ostringstream csv;
  write_runs_csv(csv, recs);
  write_text(dir / "runs.csv", csv.str());
  write_json(dir / "summary.json", summary_json(recs, cfg.analysis));
}

trainer::SweepSpec single_point(const trainer::RunConfig& r) {
  trainer::SweepSpec s;
  s.parametrizations = {r.network.parametrization.kind};
  s.block_depths = {r.network.block_depth};
  s.depths = {r.network.depth};
  s.widths = {r.network.width};
  s.seeds = {0};
  s.lrs = {r.network.parametrization.eta0};
  return s;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto cfg = require_config(o);
  const fs::path dir = prepare_out(o, {"runs.csv", "summary.json"});
  write_json(dir / "resolved-config.json", to_json(cfg));
  const auto runs = trainer::expand_grid(cfg.run, single_point(cfg.run));
  const auto recs = trainer::run_all(runs, 1);
  emit_records(dir, cfg, recs);
  const auto& r = recs.front();
  out << r.run_id << ' ' << r.parametrization << " N=" << r.width << " L=" << r.depth
      << " lr=" << format_double(r.lr) << " final_loss=" << format_double(r.final_loss())
      << (r.diverged ? " diverged" : "") << '\n';
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const auto cfg = require_config(o);
  const int jobs = resolve_jobs(o);
  const fs::path dir = prepare_out(o, {"runs.csv", "summary.json"});
  write_json(dir / "resolved-config.json", to_json(cfg));
  const auto runs = trainer::expand_grid(cfg.run, cfg.sweep);
  const auto recs = trainer::run_all(runs, jobs);
  emit_records(dir, cfg, recs);
  std::size_t diverged = 0;
  for (const auto& r : recs) diverged += r.diverged ? 1 : 0;
  out << "runs: " << recs.size() << "  diverged: " << diverged << '\n';
  for (auto axis : {ScaleAxis::kWidth, ScaleAxis::kDepth})
    for (const auto& t : transfer_reports(recs, axis, cfg.analysis.transfer_step))
      out << "transfer " << (axis == ScaleAxis::kWidth ? "width" : "depth") << ' '
          << t.key.parametrization << " k=" << t.key.block_depth << ' ' << t.verdict.to_string() << '\n';
  return kExitOk;
}

int cmd_latent_simulate(const Options& o, std::ostream& out) {
  ExperimentConfig cfg;
  if (!o.config.empty()) cfg = require_config(o);
  else if (o.seed) cfg.seed = *o.seed;
  const fs::path dir = prepare_out(o, {"latent.csv", "latent-summary.json"});
  write_json(dir / "resolved-config.json", to_json(cfg));

  const auto& l = cfg.latent;
  twolayer::CaseStudyConfig tc;
  tc.D = l.dim;
  tc.N = l.width;
  tc.scheme = l.scheme;
  tc.eta0 = l.eta0;
  tc.gamma0 = l.gamma0;
  tc.w_star = l.w_star.size() > 0 ? l.w_star : Vector::Ones(l.dim);
  tc.seed = cfg.seed;
  twolayer::TrajectoryOptions opt;
  opt.steps = l.steps;
  opt.record_every = l.record_every;
  opt.dense_hessian = l.dense_hessian;
  const auto traj = twolayer::simulate_params(tc, opt);

  std::ostringstream csv;
  csv << "step,loss,sharpness,ntk_max,gn_bound,v,trace_e,w_err\n";
  for (const auto& c : traj)
    csv << c.step << ',' << format_double(c.loss) << ',' << format_double(c.sharpness) << ','
        << format_double(c.ntk_max) << ',' << format_double(c.bound) << ',' << format_double(c.latent.v)
        << ',' << format_double(c.latent.e.trace()) << ','
        << format_double((c.latent.w - tc.w_star).norm()) << '\n';
  write_text(dir / "latent.csv", csv.str());

  const double gamma = twolayer::gamma_for(l.scheme, l.gamma0, l.width);
  const auto& last = traj.back();
  json s{{"version", std::string(kVersion)},
         {"scheme", twolayer::to_string(l.scheme)},
         {"final_step", last.step},
         {"final_loss", last.loss},
         {"final_sharpness", std::isfinite(last.sharpness) ? json(last.sharpness) : json(nullptr)},
         {"final_ntk_max", last.ntk_max}};
  if (l.eta0 > 0.0 && l.scheme != twolayer::Scheme::kSp) {
    const auto iv = twolayer::eos_interval(l.eta0, gamma, l.width, l.dim, tc.w_star);
    s["eos_interval"] = {iv.lo, iv.hi};
  }
  write_json(dir / "latent-summary.json", s);
  out << "steps: " << last.step << "  final loss: " << format_double(last.loss)
      << "  final sharpness: " << format_double(last.sharpness) << '\n';
  return kExitOk;
}

int cmd_latent_verify(const Options& o, std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(0);
  double worst = 0.0;
  int cases = 0;
  for (Index D : {2, 5})
    for (Index N : {4, 16, 64, 256})
      for (auto scheme : {twolayer::Scheme::kMup, twolayer::Scheme::kNtp})
        for (double eta0 : {0.05, 0.5}) {
          twolayer::CaseStudyConfig tc;
          tc.D = D;
          tc.N = N;
          tc.scheme = scheme;
          tc.eta0 = eta0;
          numerics::RngStream rng(seed, static_cast<std::uint64_t>(D));
          tc.w_star = rng.gaussian_vector(D);
          tc.seed = numerics::mix_seed(seed, static_cast<std::uint64_t>(cases));
          worst = std::max(worst, twolayer::oracle_deviation(tc, 200));
          ++cases;
        }
  const bool ok = worst <= 1e-8;
  out << "cases: " << cases << "  max oracle deviation: " << fmt("%.3e", worst) << "  "
      << (ok ? "ok" : "FAILED") << '\n';
  return ok ? kExitOk : kExitNumeric;
}

std::vector<trainer::RunRecord> load_runs(const Options& o) {
  const fs::path path = o.runs.empty() ? fs::path(o.out) / "runs.csv" : fs::path(o.runs);
  if (!fs::exists(path)) throw ConfigError("--runs: " + path.string() + " not found");
  try {
    return read_runs_csv(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

AnalysisConfig analysis_config(const Options& o) {
  if (o.config.empty()) return {};
  const std::uint64_t zero = 0;
  return load_config(o.config, o.seed ? &*o.seed : &zero).analysis;
}

int cmd_analyze_consistency(const Options& o, std::ostream& out) {
  const auto cfg = analysis_config(o);
  const auto recs = load_runs(o);
  const fs::path dir = prepare_out(o, {"consistency.json"});
  json reports = json::array();
  for (auto axis : {ScaleAxis::kWidth, ScaleAxis::kDepth})
    for (const auto& q : consistency_reports(recs, axis, cfg)) {
      reports.push_back(to_json(q));
      out << (axis == ScaleAxis::kWidth ? "width" : "depth") << ' ' << q.key.parametrization
          << " k=" << q.key.block_depth << " lr=" << format_double(q.lr) << ' ' << q.report.quantity
          << ": " << analysis::to_string(q.report.verdict) << '\n';
    }
  write_json(dir / "consistency.json", {{"version", std::string(kVersion)}, {"reports", reports}});
  return kExitOk;
}

int cmd_analyze_transfer(const Options& o, std::ostream& out) {
  const auto cfg = analysis_config(o);
  const auto recs = load_runs(o);
  const fs::path dir = prepare_out(o, {"transfer.json"});
  json reports = json::array();
  for (auto axis : {ScaleAxis::kWidth, ScaleAxis::kDepth})
    for (const auto& t : transfer_reports(recs, axis, cfg.transfer_step)) {
      reports.push_back(to_json(t));
      out << (axis == ScaleAxis::kWidth ? "width" : "depth") << ' ' << t.key.parametrization
          << " k=" << t.key.block_depth << ": " << t.verdict.to_string() << '\n';
    }
  write_json(dir / "transfer.json", {{"version", std::string(kVersion)}, {"reports", reports}});
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Landscape probes for width and depth scaling of neural networks", "mupscope"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Experiment config (JSON)");
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "Master seed (overrides the config)");
  app.add_option("--jobs", o.jobs, "Worker threads (default: MUPSCOPE_JOBS or 1)");
  app.add_flag("--force", o.force, "Overwrite existing outputs");

  auto* latent = app.add_subcommand("latent", "Two-layer linear latent dynamics");
  latent->require_subcommand(1);
  auto* simulate = latent->add_subcommand("simulate", "Simulate one latent trajectory");
  auto* verify = latent->add_subcommand("verify", "Check parameter vs latent trajectories");
  auto* train = app.add_subcommand("train", "Single training run");
  auto* sweep = app.add_subcommand("sweep", "Grid of training runs");
  auto* analyze = app.add_subcommand("analyze", "Post-process runs.csv");
  analyze->require_subcommand(1);
  analyze->add_option("--runs", o.runs, "runs.csv to read (default: <out>/runs.csv)");
  auto* consistency = analyze->add_subcommand("consistency", "Consistency verdicts");
  auto* transfer = analyze->add_subcommand("transfer", "Learning-rate transfer verdicts");
  auto* version = app.add_subcommand("version", "Print the version");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*version) {
      out << kVersion << '\n';
      return kExitOk;
    }
    if (*simulate) return cmd_latent_simulate(o, out);
    if (*verify) return cmd_latent_verify(o, out);
    if (*train) return cmd_train(o, out);
    if (*sweep) return cmd_sweep(o, out);
    if (*consistency) return cmd_analyze_consistency(o, out);
    if (*transfer) return cmd_analyze_transfer(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::length_error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  err << "error: no command\n";
  return kExitConfig;
}

}  // namespace mupscope::cli
