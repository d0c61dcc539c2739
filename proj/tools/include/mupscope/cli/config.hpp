#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mupscope/analysis/analysis.hpp"
#include "mupscope/trainer/sweep.hpp"
#include "mupscope/twolayer/twolayer.hpp"

namespace mupscope::cli {

/// Schema violation. The message starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnalysisConfig {
  analysis::ConsistencyThresholds thresholds;
  int transfer_step = -1;  // -1: final recorded step
  std::vector<std::string> quantities{"loss", "sharpness", "ntk_lambda_max", "trace"};
};

struct LatentConfig {
  twolayer::Scheme scheme = twolayer::Scheme::kMup;
  Index width = 64;
  Index dim = 4;
  double eta0 = 0.5;
  double gamma0 = 1.0;
  int steps = 200;
  int record_every = 1;
  bool dense_hessian = true;
  Vector w_star;  // empty: all ones
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  trainer::RunConfig run;     // base run; sweep axes override its fields
  trainer::SweepSpec sweep;   // defaults to the single point of `run`
  AnalysisConfig analysis;
  LatentConfig latent;
};

/// Validates a config document. Unknown keys, wrong types and a missing
/// "seed" throw ConfigError. `seed_override` replaces or supplies the seed.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::uint64_t* seed_override = nullptr);

/// Reads and parses a JSON file. I/O and syntax errors throw ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::uint64_t* seed_override = nullptr);

/// Fully resolved document; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& c);

}  // namespace mupscope::cli
