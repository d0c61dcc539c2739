#include "mupscope/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "mupscope/version.hpp"

namespace mupscope::cli {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Key = std::tuple<std::string, Index, Index>;

Index scale_of(const trainer::RunRecord& r, ScaleAxis axis) {
  return axis == ScaleAxis::kWidth ? r.width : r.depth;
}

Key key_of(const trainer::RunRecord& r, ScaleAxis axis) {
  return {r.parametrization, r.block_depth, axis == ScaleAxis::kWidth ? r.depth : r.width};
}

// group -> scale -> lr -> runs (one per seed)
using Grouped = std::map<Key, std::map<Index, std::map<double, std::vector<const trainer::RunRecord*>>>>;

Grouped group(const std::vector<trainer::RunRecord>& runs, ScaleAxis axis) {
  Grouped g;
  for (const auto& r : runs) g[key_of(r, axis)][scale_of(r, axis)][r.lr].push_back(&r);
  return g;
}

GroupKey to_group_key(const Key& k) { return {std::get<0>(k), std::get<1>(k), std::get<2>(k)}; }

const char* axis_name(ScaleAxis a) { return a == ScaleAxis::kWidth ? "width" : "depth"; }

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json loss_json(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return number(x);
}

}  // namespace

double loss_at(const trainer::RunRecord& r, int step) {
  if (r.rows.empty()) return kNaN;
  if (step < 0) return r.diverged ? kInf : r.rows.back().loss;
  for (const auto& row : r.rows)
    if (row.step == step) return row.loss;
  return r.diverged && r.rows.back().step <= step ? kInf : kNaN;
}

std::vector<TransferReport> transfer_reports(const std::vector<trainer::RunRecord>& runs, ScaleAxis axis,
                                             int step) {
  std::vector<TransferReport> out;
  for (const auto& [key, scales] : group(runs, axis)) {
    if (scales.size() < 2) continue;
    TransferReport rep;
    rep.axis = axis;
    rep.key = to_group_key(key);
    std::set<double> grid;
    for (const auto& [scale, lrs] : scales)
      for (const auto& [lr, rs] : lrs) grid.insert(lr);
    if (grid.size() < 2) continue;
    for (const auto& [scale, lrs] : scales) {
      analysis::LrCurve c;
      c.scale = static_cast<double>(scale);
      for (double lr : grid) {
        c.lrs.push_back(lr);
        const auto it = lrs.find(lr);
        double mean = kNaN;
        if (it != lrs.end()) {
          mean = 0.0;
          for (const auto* r : it->second) mean += loss_at(*r, step);
          mean /= static_cast<double>(it->second.size());
        }
        c.losses.push_back(mean);
      }
      rep.curves.push_back(std::move(c));
    }
    rep.optima = analysis::optimal_lr(rep.curves);
    rep.verdict = analysis::transfer_verdict(rep.optima);
    out.push_back(std::move(rep));
  }
  return out;
}

analysis::Series quantity_series(const trainer::RunRecord& r, const std::string& quantity) {
  analysis::Series s;
  s.scale = static_cast<double>(r.width);
  for (const auto& row : r.rows) {
    double v = kNaN;
    if (quantity == "loss") {
      v = row.loss;
    } else if (row.snapshot) {
      const auto& snap = *row.snapshot;
      if (quantity == "sharpness" && snap.has_hessian) v = snap.sharpness;
      else if (quantity == "ntk_lambda_max" && snap.has_ntk && !snap.ntk_top_eigs.empty())
        v = snap.ntk_top_eigs[0];
      else if (quantity == "trace" && snap.has_trace) v = snap.trace;
    }
    if (std::isfinite(v)) {
      s.steps.push_back(row.step);
      s.values.push_back(v);
    }
  }
  return s;
}

std::vector<QuantityReport> consistency_reports(const std::vector<trainer::RunRecord>& runs,
                                                ScaleAxis axis, const AnalysisConfig& cfg) {
  std::vector<QuantityReport> out;
  const auto transfers = transfer_reports(runs, axis, cfg.transfer_step);
  const auto grouped = group(runs, axis);
  for (const auto& t : transfers) {
    const auto& proxy = t.optima.back();
    const Key key{t.key.parametrization, t.key.block_depth, t.key.fixed};
    const auto& scales = grouped.at(key);
    const double lr = t.curves.back().lrs[proxy.index];

    for (const auto& quantity : cfg.quantities) {
      QuantityReport q;
      q.axis = axis;
      q.key = t.key;
      q.lr = lr;
      q.report.quantity = quantity;

      std::vector<std::vector<analysis::Series>> per_scale;
      bool usable = !proxy.all_diverged;
      if (!usable) q.note = "every run of the largest scale diverged";
      for (const auto& [scale, lrs] : scales) {
        if (!usable) break;
        const auto it = lrs.find(lr);
        if (it == lrs.end()) {
          usable = false;
          q.note = "scale " + std::to_string(scale) + " has no run at the proxy-optimal lr";
          break;
        }
        std::vector<analysis::Series> seeds;
        for (const auto* r : it->second) {
          if (r->diverged) {
            usable = false;
            q.note = "run " + r->run_id + " diverged";
            break;
          }
          auto s = quantity_series(*r, quantity);
          s.scale = static_cast<double>(scale);
          seeds.push_back(std::move(s));
        }
        per_scale.push_back(std::move(seeds));
      }

      std::vector<analysis::Series> merged;
      if (usable) {
        // Checkpoints present in every run.
        std::set<int> common(per_scale[0][0].steps.begin(), per_scale[0][0].steps.end());
        for (const auto& seeds : per_scale)
          for (const auto& s : seeds) {
            std::set<int> next;
            for (int st : s.steps)
              if (common.count(st)) next.insert(st);
            common.swap(next);
          }
        if (common.size() < 2) {
          usable = false;
          q.note = "fewer than two shared checkpoints for " + quantity;
        } else {
          for (const auto& seeds : per_scale) {
            analysis::Series m;
            m.scale = seeds[0].scale;
            for (int st : common) {
              double sum = 0.0;
              for (const auto& s : seeds) {
                const auto pos = std::lower_bound(s.steps.begin(), s.steps.end(), st) - s.steps.begin();
                sum += s.values[static_cast<std::size_t>(pos)];
              }
              m.steps.push_back(st);
              m.values.push_back(sum / static_cast<double>(seeds.size()));
            }
            merged.push_back(std::move(m));
          }
        }
      }

      if (usable) q.report = analysis::analyze_consistency(quantity, merged, cfg.thresholds);
      else q.report.verdict = analysis::Verdict::kInconclusive;
      out.push_back(std::move(q));
    }
  }
  return out;
}

json to_json(const TransferReport& t) {
  json curves = json::array();
  for (std::size_t i = 0; i < t.curves.size(); ++i) {
    const auto& c = t.curves[i];
    json losses = json::array();
    for (double l : c.losses) losses.push_back(loss_json(l));
    const auto& o = t.optima[i];
    curves.push_back({{"scale", c.scale},
                      {"lrs", c.lrs},
                      {"losses", losses},
                      {"argmin_index", o.index},
                      {"argmin_lr", number(o.lr)},
                      {"all_diverged", o.all_diverged}});
  }
  return {{"axis", axis_name(t.axis)},
          {"parametrization", t.key.parametrization},
          {"block_depth", t.key.block_depth},
          {t.axis == ScaleAxis::kWidth ? "depth" : "width", t.key.fixed},
          {"curves", curves},
          {"verdict", t.verdict.to_string()},
          {"cells", t.verdict.cells}};
}

json to_json(const QuantityReport& q) {
  json fits = json::array();
  for (const auto& f : q.report.fits) {
    json e{{"scale", f.scale}, {"final_g", number(f.final_g)}};
    if (f.fit) {
      e["a"] = number(f.fit->a);
      e["beta"] = number(f.fit->beta);
      e["r2"] = number(f.fit->r2);
    } else {
      e["a"] = e["beta"] = e["r2"] = nullptr;
    }
    fits.push_back(e);
  }
  json j{{"axis", axis_name(q.axis)},
         {"parametrization", q.key.parametrization},
         {"block_depth", q.key.block_depth},
         {q.axis == ScaleAxis::kWidth ? "depth" : "width", q.key.fixed},
         {"lr", q.lr},
         {"quantity", q.report.quantity},
         {"proxy_final", number(q.report.proxy_final)},
         {"fits", fits},
         {"verdict", analysis::to_string(q.report.verdict)}};
  if (!q.note.empty()) j["note"] = q.note;
  return j;
}

json summary_json(const std::vector<trainer::RunRecord>& runs, const AnalysisConfig& cfg) {
  json rs = json::array();
  for (const auto& r : runs) {
    json e{{"run_id", r.run_id},
           {"parametrization", r.parametrization},
           {"width", r.width},
           {"depth", r.depth},
           {"block_depth", r.block_depth},
           {"lr", r.lr},
           {"seed", r.seed},
           {"diverged", r.diverged},
           {"final_step", r.rows.empty() ? 0 : r.rows.back().step},
           {"final_loss", loss_json(r.final_loss())}};
    double sharp = kNaN;
    for (auto it = r.rows.rbegin(); it != r.rows.rend(); ++it)
      if (it->snapshot && it->snapshot->has_hessian) {
        sharp = it->snapshot->sharpness;
        break;
      }
    e["final_sharpness"] = number(sharp);
    rs.push_back(e);
  }
  json transfer = json::array();
  json consistency = json::array();
  for (auto axis : {ScaleAxis::kWidth, ScaleAxis::kDepth}) {
    for (const auto& t : transfer_reports(runs, axis, cfg.transfer_step)) transfer.push_back(to_json(t));
    for (const auto& q : consistency_reports(runs, axis, cfg)) consistency.push_back(to_json(q));
  }
  return {{"version", std::string(kVersion)},
          {"runs", rs},
          {"transfer", transfer},
          {"consistency", consistency}};
}

}  // namespace mupscope::cli
