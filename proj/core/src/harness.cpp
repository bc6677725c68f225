#include "fedbuff/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fedbuff/baselines.hpp"
#include "fedbuff/errors.hpp"
#include "fedbuff/io.hpp"
#include "fedbuff/simulator.hpp"

namespace fedbuff {

namespace fs = std::filesystem;
using nlohmann::json;

const char* const kOutputRootEnvVar = "FEDBUFF_OUT";

std::string resolve_output_root(const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  if (const char* env = std::getenv(kOutputRootEnvVar); env && *env) return env;
  return ".";
}

namespace {

std::string cell_stem(const ExperimentConfig& cfg, const CellPlan& cell) {
  return algorithm_name(cfg.algorithm) + "_T" + std::to_string(cell.horizon) + "_seed" +
         std::to_string(cell.seed);
}

// Executes one cell; any RunAbort is captured into the outcome.
CellOutcome run_cell(const ExperimentConfig& cfg, const Problem& problem, const CellPlan& cell,
                     const fs::path& exp_dir) {
  CellOutcome out;
  out.plan = cell;
  out.algorithm = algorithm_name(cfg.algorithm);

  HyperParams hp = cfg.hyper;
  hp.eta = cell.eta;
  hp.beta = cell.beta;

  SimConfig sim = cfg.sim;
  sim.horizon_T = cell.horizon;
  sim.seed = cell.seed;

  const std::string stem = cell_stem(cfg, cell);
  const fs::path csv_path = exp_dir / (stem + ".csv");
  const fs::path log_path = exp_dir / (stem + ".events.jsonl");

  std::ofstream log_stream;
  EventLogWriter* log_writer = nullptr;
  EventLogWriter writer_storage{log_stream};
  const bool want_log = cfg.emit_event_log && cfg.algorithm != Algorithm::FedAvgSync;
  if (want_log) {
    log_stream.open(log_path, std::ios::binary);
    if (!log_stream) throw ConfigError("cannot write event log: " + log_path.string());
    log_writer = &writer_storage;
    out.event_log = log_path.filename().string();
  }

  try {
    RunRecord record;
    ParamVector w0 = default_initial_model(problem, cfg.init_scale);
    switch (cfg.algorithm) {
      case Algorithm::FedBuff:
        record = run_simulation(problem, hp, sim, RunSinks{log_writer}, std::move(w0));
        break;
      case Algorithm::PureAsync:
        record = run_pure_async(problem, hp, sim, RunSinks{log_writer}, std::move(w0));
        break;
      case Algorithm::FedAvgSync:
        record = run_fedavg_sync(problem, hp, cfg.fedavg, cell.horizon, cell.seed,
                                 std::move(w0));
        break;
    }
    record.config_fingerprint = cell.fingerprint;

    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw ConfigError("cannot write metrics csv: " + csv_path.string());
    write_metrics_csv(csv, record);
    out.metrics_csv = csv_path.filename().string();
    out.rows = static_cast<int64_t>(record.rows.size());
    out.max_staleness = record.audit.max_staleness();
    out.total_uploads = record.total_uploads;
    out.final_model_hash = record.final_model_hash;
    out.ok = true;
  } catch (const RunAbort& e) {
    out.ok = false;
    out.error = e.what();
    out.partial_event_log = want_log;
  }
  return out;
}

json outcome_to_json(const CellOutcome& c) {
  json j;
  j["seed"] = c.plan.seed;
  j["horizon"] = c.plan.horizon;
  j["eta"] = c.plan.eta;
  j["beta"] = c.plan.beta;
  j["fingerprint"] = c.plan.fingerprint;
  j["algorithm"] = c.algorithm;
  j["status"] = c.ok ? "ok" : "aborted";
  if (!c.ok) j["error"] = c.error;
  j["metrics_csv"] = c.metrics_csv.empty() ? json() : json(c.metrics_csv);
  j["event_log"] = c.event_log.empty() ? json() : json(c.event_log);
  if (c.partial_event_log) j["partial"] = true;
  j["rows"] = c.rows;
  j["max_staleness"] = c.max_staleness;
  j["total_uploads"] = c.total_uploads;
  j["final_model_hash"] = hex64(c.final_model_hash);
  return j;
}

json load_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  try {
    return json::parse(read_file(path.string()));
  } catch (const json::exception& e) {
    throw ConfigError("manifest parse error in " + path.string() + ": " + e.what());
  }
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_root,
                                 int jobs) {
  ExperimentOutcome result;
  result.warnings = validate_config(cfg);
  result.fingerprint = experiment_fingerprint(cfg);

  const Problem problem = Problem::generate(cfg.problem);
  const std::vector<CellPlan> cells = plan_cells(cfg, problem.constants());

  const fs::path exp_dir =
      fs::path(out_root) / (cfg.output_dir.empty() ? cfg.name : cfg.output_dir);
  fs::create_directories(exp_dir);
  result.experiment_dir = exp_dir.string();

  result.cells.resize(cells.size());
  std::atomic<size_t> next{0};
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  auto work = [&] {
    for (;;) {
      const size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) return;
      result.cells[idx] = run_cell(cfg, problem, cells[idx], exp_dir);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  result.all_ok = std::all_of(result.cells.begin(), result.cells.end(),
                              [](const CellOutcome& c) { return c.ok; });

  json manifest;
  manifest["experiment"] = cfg.name;
  manifest["fingerprint"] = result.fingerprint;
  manifest["config"] = json::parse(canonical_config_json(cfg));
  manifest["warnings"] = result.warnings;
  json cells_json = json::array();
  json artifacts = json::array();
  artifacts.push_back("manifest.json");
  for (const auto& c : result.cells) {
    cells_json.push_back(outcome_to_json(c));
    if (!c.metrics_csv.empty()) artifacts.push_back(c.metrics_csv);
    if (!c.event_log.empty()) artifacts.push_back(c.event_log);
  }
  manifest["cells"] = cells_json;
  manifest["artifacts"] = artifacts;

  const fs::path manifest_path = exp_dir / "manifest.json";
  write_file(manifest_path.string(), manifest.dump(2) + "\n");
  result.manifest_path = manifest_path.string();
  return result;
}

BoundReport verify_bound(const std::string& experiment_dir) {
  const fs::path dir(experiment_dir);
  const json manifest = load_manifest(dir);
  const ExperimentConfig cfg = parse_config_text(manifest.at("config").dump());

  if (cfg.algorithm != Algorithm::FedBuff) {
    throw ConfigError("verify-bound: experiment must run algorithm fedbuff, got " +
                      algorithm_name(cfg.algorithm));
  }
  if (cfg.sim.mode != SimMode::UniformArrival) {
    throw ConfigError(
        "verify-bound: bound checks need the assumption-faithful uniform_arrival mode");
  }
  if (!cfg.auto_eta || !cfg.auto_beta) {
    throw ConfigError("verify-bound: experiment must use the auto stepsize schedule");
  }
  if (cfg.horizons.size() != 1) {
    throw ConfigError("verify-bound: experiment must have a single horizon");
  }
  if (cfg.seeds.size() < 2) {
    throw ConfigError("verify-bound: need >= 2 seeds, got " + std::to_string(cfg.seeds.size()));
  }

  const Problem problem = Problem::generate(cfg.problem);
  const ProblemConstants constants = problem.constants();
  const int64_t horizon = cfg.horizons.front();
  const int64_t threshold =
      min_horizon(constants.L, cfg.hyper.local_steps_q, cfg.sim.tau_max);
  if (horizon < threshold) {
    throw ConfigError("verify-bound: horizon " + std::to_string(horizon) +
                      " is below the minimum " + std::to_string(threshold) +
                      " required for the bound");
  }

  std::vector<std::vector<double>> curves;
  for (const auto& cell : manifest.at("cells")) {
    if (cell.at("status").get<std::string>() != "ok") {
      throw ConfigError("verify-bound: cell seed " + cell.at("seed").dump() +
                        " did not complete");
    }
    const auto csv_name = cell.at("metrics_csv").get<std::string>();
    const ParsedMetrics parsed = read_metrics_csv_file((dir / csv_name).string());
    std::vector<double> curve(parsed.rows.size());
    for (size_t t = 0; t < parsed.rows.size(); ++t) curve[t] = parsed.rows[t].grad_norm_sq;
    curves.push_back(std::move(curve));
  }

  const AggregateCurve agg = aggregate_curves(curves);

  BoundReport report;
  report.inputs.L = constants.L;
  report.inputs.sigma_hat_sq =
      cfg.hyper.full_batch ? 0.0
                           : constants.with_batch_size(cfg.hyper.batch_size).sigma_hat_sq;
  report.inputs.gamma_sq = constants.gamma_sq;
  const ParamVector w0 = default_initial_model(problem, cfg.init_scale);
  report.inputs.f0_minus_fstar = problem.global_value(w0) - constants.f_star;
  report.inputs.n = cfg.problem.n;
  report.inputs.local_steps_q = cfg.hyper.local_steps_q;
  report.inputs.buffer_size_k = cfg.hyper.buffer_size_k;
  report.inputs.tau = cfg.sim.tau_max;
  report.inputs.horizon_T = horizon;

  report.bound_value = stationarity_bound(report.inputs);
  report.empirical_lhs = agg.time_avg_mean;
  report.standard_error = agg.time_avg_stderr;
  report.num_seeds = agg.num_seeds;
  // Equality tolerance so the degenerate 0 <= 0 case counts as satisfied.
  report.satisfied =
      report.empirical_lhs + 2.0 * report.standard_error <= report.bound_value + 1e-12;

  json summary;
  const fs::path summary_path = dir / "summary.json";
  if (fs::exists(summary_path)) {
    summary = json::parse(read_file(summary_path.string()));
  }
  summary["bound_inputs"] = {{"L", report.inputs.L},
                             {"sigma_hat_sq", report.inputs.sigma_hat_sq},
                             {"gamma_sq", report.inputs.gamma_sq},
                             {"f0_minus_fstar", report.inputs.f0_minus_fstar},
                             {"n", report.inputs.n},
                             {"Q", report.inputs.local_steps_q},
                             {"K", report.inputs.buffer_size_k},
                             {"tau", report.inputs.tau},
                             {"T", report.inputs.horizon_T}};
  summary["bound_value"] = report.bound_value;
  summary["empirical_lhs"] = report.empirical_lhs;
  summary["standard_error"] = report.standard_error;
  summary["num_seeds"] = report.num_seeds;
  summary["satisfied"] = report.satisfied;
  if (!summary.contains("rate_fit")) summary["rate_fit"] = nullptr;
  write_file(summary_path.string(), summary.dump(2) + "\n");
  return report;
}

TraceDiffResult trace_diff(const std::string& log_a, const std::string& log_b) {
  const std::string a = read_file(log_a);
  const std::string b = read_file(log_b);

  TraceDiffResult result;
  if (a == b) {
    // Still validate the shared content line by line.
    std::istringstream sa(a);
    std::string line;
    int64_t line_no = 0;
    while (std::getline(sa, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (!json::accept(line)) {
        throw ConfigError("trace-diff: parse error in " + log_a + " at line " +
                          std::to_string(line_no));
      }
    }
    result.equal = true;
    return result;
  }

  std::istringstream sa(a), sb(b);
  std::string la, lb;
  int64_t line_no = 0;
  for (;;) {
    const bool got_a = static_cast<bool>(std::getline(sa, la));
    const bool got_b = static_cast<bool>(std::getline(sb, lb));
    ++line_no;
    if (!got_a && !got_b) break;
    if (got_a && !la.empty() && !json::accept(la)) {
      throw ConfigError("trace-diff: parse error in " + log_a + " at line " +
                        std::to_string(line_no));
    }
    if (got_b && !lb.empty() && !json::accept(lb)) {
      throw ConfigError("trace-diff: parse error in " + log_b + " at line " +
                        std::to_string(line_no));
    }
    if (!got_a || !got_b || la != lb) {
      result.equal = false;
      result.line = line_no;
      result.line_a = got_a ? la : "<end of file>";
      result.line_b = got_b ? lb : "<end of file>";
      return result;
    }
  }
  // Same lines but different bytes (e.g. trailing newline).
  result.equal = false;
  result.line = line_no;
  result.line_a = "<byte-level difference>";
  result.line_b = "<byte-level difference>";
  return result;
}

RateFit fit_rate_from_dir(const std::string& experiment_dir) {
  const fs::path dir(experiment_dir);
  const json manifest = load_manifest(dir);

  std::map<int64_t, std::vector<std::vector<double>>> by_horizon;
  for (const auto& cell : manifest.at("cells")) {
    if (cell.at("status").get<std::string>() != "ok") continue;
    const auto horizon = cell.at("horizon").get<int64_t>();
    const auto csv_name = cell.at("metrics_csv").get<std::string>();
    const ParsedMetrics parsed = read_metrics_csv_file((dir / csv_name).string());
    std::vector<double> curve(parsed.rows.size());
    for (size_t t = 0; t < parsed.rows.size(); ++t) curve[t] = parsed.rows[t].grad_norm_sq;
    by_horizon[horizon].push_back(std::move(curve));
  }
  if (by_horizon.size() < 4) {
    throw ConfigError("fit-rate: need >= 4 horizons, found " +
                      std::to_string(by_horizon.size()));
  }

  std::vector<int64_t> horizons;
  std::vector<double> avgs;
  for (const auto& [horizon, curves] : by_horizon) {
    const AggregateCurve agg = aggregate_curves(curves);
    horizons.push_back(horizon);
    avgs.push_back(agg.time_avg_mean);
  }
  const RateFit fit = fit_rate(horizons, avgs);

  json summary;
  const fs::path summary_path = dir / "summary.json";
  if (fs::exists(summary_path)) {
    summary = json::parse(read_file(summary_path.string()));
  }
  summary["rate_fit"] = {{"horizons", fit.horizons},
                         {"time_avg_grad_norm_sq", fit.time_avg_grad_norm_sq},
                         {"slope", fit.slope},
                         {"residual", fit.residual}};
  write_file(summary_path.string(), summary.dump(2) + "\n");
  return fit;
}

}  // namespace fedbuff
