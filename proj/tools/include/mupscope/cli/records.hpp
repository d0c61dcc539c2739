#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mupscope/trainer/train.hpp"

namespace mupscope::cli {

inline constexpr std::string_view kRunsHeader =
    "run_id,parametrization,width,depth,block_depth,lr,seed,step,lr_effective,loss,diverged,"
    "sharpness,hess_eig_2,hess_eig_3,ntk_eig_1,ntk_eig_2,trace,dir_sharpness,gn_top,res_top,"
    "converged_flags";

/// %.17g, "inf"/"-inf" for infinities, empty for NaN.
std::string format_double(double x);

/// Inverse of format_double; empty fields read as NaN.
double parse_double(std::string_view field);

/// Header plus one line per recorded row, ordered by run_id then step.
/// converged_flags holds one '1'/'0' per Hessian eigenvalue, followed by
/// "/r" and the residual flag when the Gauss-Newton probe ran.
void write_runs_csv(std::ostream& out, const std::vector<trainer::RunRecord>& records);

/// Reads runs.csv back into records. Snapshot fields absent from the file are
/// NaN. Throws std::runtime_error on a malformed file.
std::vector<trainer::RunRecord> read_runs_csv(const std::filesystem::path& path);
std::vector<trainer::RunRecord> read_runs_csv(std::istream& in);

}  // namespace mupscope::cli
