#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mupscope/analysis/analysis.hpp"
#include "mupscope/cli/config.hpp"
#include "mupscope/trainer/train.hpp"

namespace mupscope::cli {

/// Runs sharing everything but the scale axis and lr.
struct GroupKey {
  std::string parametrization;
  Index block_depth = 1;
  Index fixed = 0;  // depth for width groups, width for depth groups
};

enum class ScaleAxis { kWidth, kDepth };

struct TransferReport {
  ScaleAxis axis = ScaleAxis::kWidth;
  GroupKey key;
  std::vector<analysis::LrCurve> curves;  // seed-averaged, ascending scale
  std::vector<analysis::OptimalLr> optima;
  analysis::TransferVerdict verdict;
};

struct QuantityReport {
  ScaleAxis axis = ScaleAxis::kWidth;
  GroupKey key;
  double lr = 0.0;
  analysis::ConsistencyReport report;
  std::string note;  // why the verdict is inconclusive, when it is forced
};

/// Loss of a run at `step` (-1: final row); +inf for diverged runs, NaN if
/// the step was not recorded.
double loss_at(const trainer::RunRecord& r, int step);

/// Transfer reports for every group with at least two scales on `axis`.
std::vector<TransferReport> transfer_reports(const std::vector<trainer::RunRecord>& runs, ScaleAxis axis,
                                             int step);

/// Series of a quantity (loss | sharpness | ntk_lambda_max | trace) for one
/// run: steps where it is finite.
analysis::Series quantity_series(const trainer::RunRecord& r, const std::string& quantity);

/// Consistency reports at each group's proxy-optimal lr (the largest scale's
/// argmin). Seeds are averaged over checkpoints shared by every run.
std::vector<QuantityReport> consistency_reports(const std::vector<trainer::RunRecord>& runs,
                                                ScaleAxis axis, const AnalysisConfig& cfg);

nlohmann::json to_json(const TransferReport& t);
nlohmann::json to_json(const QuantityReport& q);

/// summary.json: per-run final metrics plus transfer and consistency reports.
nlohmann::json summary_json(const std::vector<trainer::RunRecord>& runs, const AnalysisConfig& cfg);

}  // namespace mupscope::cli
