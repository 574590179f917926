#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "apmlmc/config.hpp"
#include "apmlmc/mlmc.hpp"

namespace apmlmc {

// run: adaptive MLMC; writes levels.csv and summary.csv into output_dir.
int cmd_run(const RunConfig& config);

// sweep: one adaptive run per dt1 grid point; writes sweep.csv with columns
// dt1, total_cost, leave_out_score (at level 1), estimate.
int cmd_sweep(const RunConfig& config, const std::vector<double>& dt1_grid);

// tables: builds and persists the run-length tables (and optionally the
// velocity-sum table) for M fine steps at (epsilon, dt).
int cmd_tables(int m_steps, double epsilon, double dt, int lambda_max,
               const std::string& out_path, const std::string& velocity_sums_path);

// analyze: prints the closed-form coupling quantities for the level-1 pair.
int cmd_analyze(const RunConfig& config, std::ostream& out);

// trace: writes per-sub-step positions of one coupled pair over n_units
// coarse steps, with exact diffusion/transport decomposition columns.
int cmd_trace(const RunConfig& config, long n_units);

// full argument-parsing entry point; returns the process exit code
// (0 success, 2 configuration error, 1 other failure)
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);  // without argv[0]

MlmcResult run_from_config(const RunConfig& config);

}  // namespace apmlmc
