#include "mupscope/cli/records.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mupscope::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double pick(const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : kNaN; }

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <class T>
T parse_int(std::string_view s, const char* what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::runtime_error(std::string("runs.csv: bad ") + what + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return {};
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(std::string_view field) {
  if (field.empty()) return kNaN;
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  const std::string s(field);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw std::runtime_error("runs.csv: bad number '" + s + "'");
  return v;
}

void write_runs_csv(std::ostream& out, const std::vector<trainer::RunRecord>& records) {
  std::vector<const trainer::RunRecord*> order;
  for (const auto& r : records) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->run_id < b->run_id; });

  out << kRunsHeader << '\n';
  for (const auto* r : order) {
    const std::string prefix = r->run_id + "," + r->parametrization + "," + std::to_string(r->width) +
                               "," + std::to_string(r->depth) + "," + std::to_string(r->block_depth) +
                               "," + format_double(r->lr) + "," + std::to_string(r->seed) + ",";
    for (const auto& row : r->rows) {
      out << prefix << row.step << ',' << format_double(row.lr_effective) << ','
          << format_double(row.loss) << ',' << (r->diverged ? 1 : 0);
      if (row.snapshot) {
        const auto& s = *row.snapshot;
        const double h1 = s.has_hessian ? pick(s.hessian_top_eigs, 0) : kNaN;
        const double h2 = s.has_hessian ? pick(s.hessian_top_eigs, 1) : kNaN;
        const double h3 = s.has_hessian ? pick(s.hessian_top_eigs, 2) : kNaN;
        const double n1 = s.has_ntk ? pick(s.ntk_top_eigs, 0) : kNaN;
        const double n2 = s.has_ntk ? pick(s.ntk_top_eigs, 1) : kNaN;
        std::string flags;
        for (bool c : s.hessian_converged) flags += c ? '1' : '0';
        if (s.has_gn) flags += s.residual_converged ? "/r1" : "/r0";
        out << ',' << format_double(h1) << ',' << format_double(h2) << ',' << format_double(h3) << ','
            << format_double(n1) << ',' << format_double(n2) << ','
            << format_double(s.has_trace ? s.trace : kNaN) << ','
            << format_double(s.has_directional ? s.directional_sharpness : kNaN) << ','
            << format_double(s.has_gn ? s.gn_top : kNaN) << ','
            << format_double(s.has_gn ? s.residual_top : kNaN) << ',' << flags;
      } else {
        out << ",,,,,,,,,,";
      }
      out << '\n';
    }
  }
}

std::vector<trainer::RunRecord> read_runs_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRunsHeader)
    throw std::runtime_error("runs.csv: missing or unexpected header");
  std::vector<trainer::RunRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 21)
      throw std::runtime_error("runs.csv: line " + std::to_string(lineno) + " has " +
                               std::to_string(f.size()) + " fields, expected 21");
    if (out.empty() || out.back().run_id != f[0]) {
      trainer::RunRecord r;
      r.run_id = std::string(f[0]);
      r.run_index = static_cast<Index>(out.size());
      r.parametrization = std::string(f[1]);
      r.width = parse_int<Index>(f[2], "width");
      r.depth = parse_int<Index>(f[3], "depth");
      r.block_depth = parse_int<Index>(f[4], "block_depth");
      r.lr = parse_double(f[5]);
      r.seed = parse_int<std::uint64_t>(f[6], "seed");
      r.diverged = f[10] == "1";
      out.push_back(std::move(r));
    }
    trainer::RunRow row;
    row.step = parse_int<int>(f[7], "step");
    row.lr_effective = parse_double(f[8]);
    row.loss = parse_double(f[9]);
    const bool any_probe =
        std::any_of(f.begin() + 11, f.end(), [](std::string_view s) { return !s.empty(); });
    if (any_probe) {
      spectral::SpectralSnapshot s;
      s.step = row.step;
      const double h[3] = {parse_double(f[11]), parse_double(f[12]), parse_double(f[13])};
      s.has_hessian = !f[11].empty();
      for (double v : h)
        if (!std::isnan(v)) s.hessian_top_eigs.push_back(v);
      s.sharpness = s.has_hessian ? h[0] : kNaN;
      s.has_ntk = !f[14].empty();
      for (int i = 14; i <= 15; ++i)
        if (!f[static_cast<std::size_t>(i)].empty()) s.ntk_top_eigs.push_back(parse_double(f[static_cast<std::size_t>(i)]));
      s.has_trace = !f[16].empty();
      s.trace = parse_double(f[16]);
      s.has_directional = !f[17].empty();
      s.directional_sharpness = parse_double(f[17]);
      s.has_gn = !f[18].empty();
      s.gn_top = parse_double(f[18]);
      s.residual_top = parse_double(f[19]);
      const std::string_view flags = f[20];
      const std::size_t slash = flags.find('/');
      for (char ch : flags.substr(0, slash)) s.hessian_converged.push_back(ch == '1');
      s.residual_converged = slash != std::string_view::npos && flags.substr(slash) == "/r1";
      row.snapshot = std::move(s);
    }
    out.back().rows.push_back(std::move(row));
  }
  return out;
}

std::vector<trainer::RunRecord> read_runs_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  return read_runs_csv(in);
}

}  // namespace mupscope::cli
