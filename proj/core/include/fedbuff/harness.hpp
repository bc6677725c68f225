#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedbuff/analysis.hpp"
#include "fedbuff/config.hpp"
#include "fedbuff/run_record.hpp"

namespace fedbuff {

struct CellOutcome {
  CellPlan plan;
  std::string algorithm;
  std::string metrics_csv;  // path relative to the experiment directory; empty on abort
  std::string event_log;    // ditto; empty when logging is off
  bool ok = false;
  bool partial_event_log = false;
  std::string error;
  int64_t rows = 0;
  int64_t max_staleness = 0;
  int64_t total_uploads = 0;
  uint64_t final_model_hash = 0;
};

struct ExperimentOutcome {
  std::string experiment_dir;
  std::string fingerprint;
  std::string manifest_path;
  std::vector<CellOutcome> cells;
  std::vector<std::string> warnings;
  bool all_ok = false;
};

// Validates, runs every (seed x horizon) cell (optionally jobs-way parallel;
// artifacts are byte-identical either way), writes per-cell CSVs and event
// logs plus a manifest listing every artifact.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_root,
                                 int jobs = 1);

struct BoundReport {
  BoundInputs inputs;
  double bound_value = 0.0;
  double empirical_lhs = 0.0;   // mean over seeds of per-seed time averages
  double standard_error = 0.0;  // of that mean
  int num_seeds = 0;
  bool satisfied = false;  // empirical_lhs + 2*standard_error <= bound (+eps)
};

// Checks the stationarity bound against a completed experiment directory.
// Refuses (ConfigError) unless the experiment is assumption-faithful:
// fedbuff algorithm, uniform_arrival mode, auto schedule, >= 2 seeds, a
// single horizon at or above min_horizon. Writes summary.json.
BoundReport verify_bound(const std::string& experiment_dir);

struct TraceDiffResult {
  bool equal = false;
  int64_t line = 0;  // 1-based first divergence
  std::string line_a;
  std::string line_b;
};

// Byte-level comparison of two event logs; validates each line parses as
// JSON and reports the first differing line.
TraceDiffResult trace_diff(const std::string& log_a, const std::string& log_b);

// Aggregates per-horizon averages from an experiment directory and fits the
// log-log rate. Requires >= 4 horizons with >= 2 completed seeds each.
// Merges the result into summary.json.
RateFit fit_rate_from_dir(const std::string& experiment_dir);

// Output root precedence: explicit --out, then this environment variable,
// then the current directory.
extern const char* const kOutputRootEnvVar;
std::string resolve_output_root(const std::string& out_flag);

}  // namespace fedbuff
