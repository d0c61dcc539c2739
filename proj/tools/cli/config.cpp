#include "mupscope/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace mupscope::cli {

using nlohmann::json;

namespace {

// Typed access to one JSON object with unknown-key rejection.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) { return j_.at(key); }
  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    out = convert<T>(at(key), path(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) fail(path(k), "unknown key '" + k + "'");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
        const auto s = v.get<std::int64_t>();
        if (s < 0) fail(path, "must be non-negative");
        return static_cast<T>(s);
      } else {
        if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<T>::max()))
          fail(path, "out of range");
        const auto s = v.get<std::int64_t>();
        if (s < std::numeric_limits<T>::min() || s > std::numeric_limits<T>::max()) fail(path, "out of range");
        return static_cast<T>(s);
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "expected a string");
      return v.get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported type");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T>
std::vector<T> get_list(Section& s, const std::string& key, const std::vector<T>& fallback) {
  if (!s.has(key)) return fallback;
  const json& v = s.at(key);
  const std::string p = s.path(key);
  if (!v.is_array()) Section::fail(p, "expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(Section::convert<T>(v[i], p + "[" + std::to_string(i) + "]"));
  return out;
}

Vector get_vector(Section& s, const std::string& key) {
  const auto v = get_list<double>(s, key, {});
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Index>(i)] = v[i];
  return out;
}

// Converts enum parse failures into path-bearing config errors.
template <class F>
auto parse_enum(Section& s, const std::string& key, F&& parse, decltype(parse("")) fallback) {
  if (!s.has(key)) return fallback;
  const std::string text = Section::convert<std::string>(s.at(key), s.path(key));
  try {
    return parse(text);
  } catch (const std::invalid_argument& e) {
    Section::fail(s.path(key), e.what());
  }
}

void check(bool ok, const std::string& path, const std::string& what) {
  if (!ok) Section::fail(path, what);
}

void parse_network(const json& j, ExperimentConfig& c) {
  Section s(j, "network");
  auto& n = c.run.network;
  s.get("width", n.width);
  s.get("depth", n.depth);
  s.get("tau", n.tau);
  s.get("block_depth", n.block_depth);
  n.activation = parse_enum(s, "activation", network::activation_from_string, n.activation);
  s.get("input_dim", n.input_dim);
  s.get("num_classes", n.num_classes);
  n.parametrization.kind =
      parse_enum(s, "parametrization", network::param_kind_from_string, n.parametrization.kind);
  s.get("gamma0", n.parametrization.gamma0);
  s.get("alpha", n.parametrization.alpha);
  s.get("eta0", n.parametrization.eta0);
  s.finish();
  check(n.width >= 1, "network.width", "must be >= 1");
  check(n.depth >= 1, "network.depth", "must be >= 1");
  check(n.block_depth >= 1, "network.block_depth", "must be >= 1");
  check(n.input_dim >= 1, "network.input_dim", "must be >= 1");
  check(n.num_classes >= 1, "network.num_classes", "must be >= 1");
  check(n.parametrization.gamma0 > 0.0, "network.gamma0", "must be > 0");
  check(n.parametrization.eta0 >= 0.0, "network.eta0", "must be >= 0");
}

void parse_data(const json& j, ExperimentConfig& c) {
  Section s(j, "data");
  auto& d = c.run.data;
  d.kind = parse_enum(s, "kind", trainer::dataset_kind_from_string, d.kind);
  s.get("count", d.count);
  s.get("teacher_seed", d.teacher_seed);
  s.get("noise_std", d.noise_std);
  s.get("teacher_scale", d.teacher_scale);
  if (s.has("w_star")) d.w_star = get_vector(s, "w_star");
  s.finish();
  check(d.count >= 1, "data.count", "must be >= 1");
  check(d.noise_std >= 0.0, "data.noise_std", "must be >= 0");
  check(d.teacher_scale > 0.0, "data.teacher_scale", "must be > 0");
}

void parse_optim(const json& j, ExperimentConfig& c) {
  Section s(j, "optim");
  auto& o = c.run.optim;
  o.algo = parse_enum(s, "algo", trainer::algo_from_string, o.algo);
  s.get("batch_size", o.batch_size);
  s.get("warmup_steps", o.warmup_steps);
  s.get("beta1", o.beta1);
  s.get("beta2", o.beta2);
  s.get("eps_adam", o.eps_adam);
  s.get("random_feature_mode", o.random_feature_mode);
  s.get("lr_depth_scale", o.lr_depth_scale);
  s.get("steps", c.run.steps);
  c.run.objective.loss = parse_enum(s, "loss", network::loss_kind_from_string, c.run.objective.loss);
  c.run.objective.reduction =
      parse_enum(s, "reduction", network::reduction_from_string, c.run.objective.reduction);
  s.finish();
  check(o.batch_size >= 0, "optim.batch_size", "must be >= 0");
  check(o.warmup_steps >= 0, "optim.warmup_steps", "must be >= 0");
  check(o.beta1 >= 0.0 && o.beta1 < 1.0, "optim.beta1", "must lie in [0, 1)");
  check(o.beta2 >= 0.0 && o.beta2 < 1.0, "optim.beta2", "must lie in [0, 1)");
  check(o.eps_adam >= 0.0, "optim.eps_adam", "must be >= 0");
  check(c.run.steps >= 0, "optim.steps", "must be >= 0");
}

void parse_probes(const json& j, ExperimentConfig& c) {
  Section s(j, "probes");
  auto& p = c.run.probes;
  s.get("spectral_every", c.run.spectral_every);
  s.get("log_every", c.run.log_every);
  s.get("probe_batch_size", c.run.probe_batch_size);
  s.get("probe_batch_seed", c.run.probe_batch_seed);
  s.get("top_k", p.top_k);
  s.get("power_iter_max", p.power_iter_max);
  s.get("power_tol", p.power_tol);
  s.get("hutchinson_probes", p.hutchinson_probes);
  s.get("ntk_k", p.ntk_k);
  s.get("hessian", p.hessian);
  s.get("ntk", p.ntk);
  s.get("trace", p.trace);
  s.get("directional", p.directional);
  s.get("gauss_newton", p.gauss_newton);
  if (s.has("adam_scaling")) {
    const auto v = Section::convert<std::string>(s.at("adam_scaling"), "probes.adam_scaling");
    if (v == "preconditioned") p.adam_scaling = spectral::AdamScaling::kPreconditioned;
    else if (v == "width_depth") p.adam_scaling = spectral::AdamScaling::kWidthDepth;
    else Section::fail("probes.adam_scaling", "expected 'preconditioned' or 'width_depth'");
  }
  s.finish();
  check(c.run.spectral_every >= 0, "probes.spectral_every", "must be >= 0");
  check(c.run.log_every >= 1, "probes.log_every", "must be >= 1");
  check(c.run.probe_batch_size >= 1, "probes.probe_batch_size", "must be >= 1");
  check(p.top_k >= 1, "probes.top_k", "must be >= 1");
  check(p.power_iter_max >= 1, "probes.power_iter_max", "must be >= 1");
  check(p.power_tol > 0.0, "probes.power_tol", "must be > 0");
  check(p.hutchinson_probes >= 1, "probes.hutchinson_probes", "must be >= 1");
  check(p.ntk_k >= 1, "probes.ntk_k", "must be >= 1");
}

void parse_sweep(const json& j, ExperimentConfig& c) {
  Section s(j, "sweep");
  auto& w = c.sweep;
  if (s.has("parametrizations")) {
    w.parametrizations.clear();
    const auto names = get_list<std::string>(s, "parametrizations", {});
    for (std::size_t i = 0; i < names.size(); ++i) {
      try {
        w.parametrizations.push_back(network::param_kind_from_string(names[i]));
      } catch (const std::invalid_argument& e) {
        Section::fail("sweep.parametrizations[" + std::to_string(i) + "]", e.what());
      }
    }
  }
  w.widths = get_list<Index>(s, "widths", w.widths);
  w.depths = get_list<Index>(s, "depths", w.depths);
  w.block_depths = get_list<Index>(s, "block_depths", w.block_depths);
  w.seeds = get_list<std::uint64_t>(s, "seeds", w.seeds);
  const bool has_lrs = s.has("lrs");
  const bool has_grid = s.has("lr_grid");
  if (has_lrs && has_grid) Section::fail("sweep.lr_grid", "give either lrs or lr_grid");
  if (has_lrs) w.lrs = get_list<double>(s, "lrs", {});
  if (has_grid) {
    Section g(s.at("lr_grid"), "sweep.lr_grid");
    double lo = 0.0, hi = 0.0;
    int n = 0;
    if (!g.has("lo") || !g.has("hi") || !g.has("n")) Section::fail("sweep.lr_grid", "needs lo, hi and n");
    g.get("lo", lo);
    g.get("hi", hi);
    g.get("n", n);
    g.finish();
    check(lo > 0.0 && hi >= lo, "sweep.lr_grid", "needs 0 < lo <= hi");
    check(n >= 1, "sweep.lr_grid.n", "must be >= 1");
    w.lrs = trainer::log_grid(lo, hi, n);
  }
  s.finish();
  auto nonempty = [](bool ok, const char* axis) {
    if (!ok) Section::fail(std::string("sweep.") + axis, "must not be empty");
  };
  nonempty(!w.parametrizations.empty(), "parametrizations");
  nonempty(!w.widths.empty(), "widths");
  nonempty(!w.depths.empty(), "depths");
  nonempty(!w.block_depths.empty(), "block_depths");
  nonempty(!w.seeds.empty(), "seeds");
  nonempty(!w.lrs.empty(), "lrs");
  for (std::size_t i = 0; i < w.lrs.size(); ++i)
    check(std::isfinite(w.lrs[i]) && w.lrs[i] >= 0.0, "sweep.lrs[" + std::to_string(i) + "]",
          "must be finite and >= 0");
  for (std::size_t i = 1; i < w.lrs.size(); ++i)
    check(w.lrs[i] > w.lrs[i - 1], "sweep.lrs", "must be strictly increasing");
  for (Index v : w.widths) check(v >= 1, "sweep.widths", "entries must be >= 1");
  for (Index v : w.depths) check(v >= 1, "sweep.depths", "entries must be >= 1");
  for (Index v : w.block_depths) check(v >= 1, "sweep.block_depths", "entries must be >= 1");
}

void parse_analysis(const json& j, ExperimentConfig& c) {
  Section s(j, "analysis");
  auto& a = c.analysis;
  s.get("beta", a.thresholds.beta);
  s.get("r2", a.thresholds.r2);
  s.get("band", a.thresholds.band);
  s.get("min_scale", a.thresholds.min_scale);
  s.get("final_window", a.thresholds.final_window);
  s.get("transfer_step", a.transfer_step);
  a.quantities = get_list<std::string>(s, "quantities", a.quantities);
  s.finish();
  static const std::set<std::string> known{"loss", "sharpness", "ntk_lambda_max", "trace"};
  for (std::size_t i = 0; i < a.quantities.size(); ++i)
    check(known.count(a.quantities[i]) > 0, "analysis.quantities[" + std::to_string(i) + "]",
          "unknown quantity '" + a.quantities[i] + "' (loss|sharpness|ntk_lambda_max|trace)");
  check(a.thresholds.band >= 0.0, "analysis.band", "must be >= 0");
  check(a.thresholds.final_window >= 1, "analysis.final_window", "must be >= 1");
  check(a.transfer_step >= -1, "analysis.transfer_step", "must be >= -1");
}

void parse_latent(const json& j, ExperimentConfig& c) {
  Section s(j, "latent");
  auto& l = c.latent;
  l.scheme = parse_enum(s, "scheme", twolayer::scheme_from_string, l.scheme);
  s.get("width", l.width);
  s.get("dim", l.dim);
  s.get("eta0", l.eta0);
  s.get("gamma0", l.gamma0);
  s.get("steps", l.steps);
  s.get("record_every", l.record_every);
  s.get("dense_hessian", l.dense_hessian);
  if (s.has("w_star")) l.w_star = get_vector(s, "w_star");
  s.finish();
  check(l.width >= 1, "latent.width", "must be >= 1");
  check(l.dim >= 1, "latent.dim", "must be >= 1");
  check(l.eta0 >= 0.0, "latent.eta0", "must be >= 0");
  check(l.gamma0 > 0.0, "latent.gamma0", "must be > 0");
  check(l.steps >= 0, "latent.steps", "must be >= 0");
  check(l.record_every >= 1, "latent.record_every", "must be >= 1");
  check(l.w_star.size() == 0 || l.w_star.size() == l.dim, "latent.w_star", "must have dim entries");
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::uint64_t* seed_override) {
  Section root(doc, "");
  ExperimentConfig c;
  if (root.has("seed")) root.get("seed", c.seed);
  else if (!seed_override) Section::fail("seed", "missing (a master seed is required)");
  if (seed_override) c.seed = *seed_override;

  if (root.has("network")) parse_network(root.at("network"), c);
  // Data dimensions follow the network.
  c.run.data.input_dim = c.run.network.input_dim;
  c.run.data.num_classes = c.run.network.num_classes;
  if (root.has("data")) parse_data(root.at("data"), c);
  if (root.has("optim")) parse_optim(root.at("optim"), c);
  if (root.has("probes")) parse_probes(root.at("probes"), c);

  const auto& n = c.run.network;
  c.sweep.parametrizations = {n.parametrization.kind};
  c.sweep.widths = {n.width};
  c.sweep.depths = {n.depth};
  c.sweep.block_depths = {n.block_depth};
  c.sweep.seeds = {0};
  c.sweep.lrs = {n.parametrization.eta0};
  if (root.has("sweep")) parse_sweep(root.at("sweep"), c);
  if (root.has("analysis")) parse_analysis(root.at("analysis"), c);
  if (root.has("latent")) parse_latent(root.at("latent"), c);
  root.finish();

  c.run.master_seed = c.seed;
  if (c.run.data.kind == trainer::DatasetKind::kIdentityDesign) c.run.data.count = c.run.data.input_dim;
  try {
    c.run.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::uint64_t* seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, seed_override);
}

json to_json(const ExperimentConfig& c) {
  const auto& n = c.run.network;
  const auto& d = c.run.data;
  const auto& o = c.run.optim;
  const auto& p = c.run.probes;
  json j;
  j["seed"] = c.seed;
  j["network"] = {{"width", n.width},
                  {"depth", n.depth},
                  {"tau", n.tau},
                  {"block_depth", n.block_depth},
                  {"activation", network::to_string(n.activation)},
                  {"input_dim", n.input_dim},
                  {"num_classes", n.num_classes},
                  {"parametrization", network::to_string(n.parametrization.kind)},
                  {"gamma0", n.parametrization.gamma0},
                  {"alpha", n.parametrization.alpha},
                  {"eta0", n.parametrization.eta0}};
  j["data"] = {{"kind", trainer::to_string(d.kind)},
               {"count", d.count},
               {"teacher_seed", d.teacher_seed},
               {"noise_std", d.noise_std},
               {"teacher_scale", d.teacher_scale}};
  if (d.w_star.size() > 0) j["data"]["w_star"] = vector_json(d.w_star);
  j["optim"] = {{"algo", trainer::to_string(o.algo)},
                {"batch_size", o.batch_size},
                {"warmup_steps", o.warmup_steps},
                {"beta1", o.beta1},
                {"beta2", o.beta2},
                {"eps_adam", o.eps_adam},
                {"random_feature_mode", o.random_feature_mode},
                {"lr_depth_scale", o.lr_depth_scale},
                {"steps", c.run.steps},
                {"loss", network::to_string(c.run.objective.loss)},
                {"reduction", network::to_string(c.run.objective.reduction)}};
  j["probes"] = {{"spectral_every", c.run.spectral_every},
                 {"log_every", c.run.log_every},
                 {"probe_batch_size", c.run.probe_batch_size},
                 {"probe_batch_seed", c.run.probe_batch_seed},
                 {"top_k", p.top_k},
                 {"power_iter_max", p.power_iter_max},
                 {"power_tol", p.power_tol},
                 {"hutchinson_probes", p.hutchinson_probes},
                 {"ntk_k", p.ntk_k},
                 {"hessian", p.hessian},
                 {"ntk", p.ntk},
                 {"trace", p.trace},
                 {"directional", p.directional},
                 {"gauss_newton", p.gauss_newton},
                 {"adam_scaling", p.adam_scaling == spectral::AdamScaling::kPreconditioned
                                      ? "preconditioned"
                                      : "width_depth"}};
  json kinds = json::array();
  for (auto k : c.sweep.parametrizations) kinds.push_back(network::to_string(k));
  j["sweep"] = {{"parametrizations", kinds},
                {"widths", c.sweep.widths},
                {"depths", c.sweep.depths},
                {"block_depths", c.sweep.block_depths},
                {"seeds", c.sweep.seeds},
                {"lrs", c.sweep.lrs}};
  const auto& t = c.analysis.thresholds;
  j["analysis"] = {{"beta", t.beta},
                   {"r2", t.r2},
                   {"band", t.band},
                   {"min_scale", t.min_scale},
                   {"final_window", t.final_window},
                   {"transfer_step", c.analysis.transfer_step},
                   {"quantities", c.analysis.quantities}};
  const auto& l = c.latent;
  j["latent"] = {{"scheme", twolayer::to_string(l.scheme)},
                 {"width", l.width},
                 {"dim", l.dim},
                 {"eta0", l.eta0},
                 {"gamma0", l.gamma0},
                 {"steps", l.steps},
                 {"record_every", l.record_every},
                 {"dense_hessian", l.dense_hessian}};
  if (l.w_star.size() > 0) j["latent"]["w_star"] = vector_json(l.w_star);
  return j;
}

}  // namespace mupscope::cli
