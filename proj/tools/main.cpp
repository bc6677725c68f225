// fedbuff: deterministic simulator and analysis toolkit for buffered
// asynchronous federated learning on synthetic objectives.
//
// Exit codes: 0 success / check satisfied, 1 validation error,
// 2 runtime abort (NaN, staleness violation, deadlock),
// 3 check not satisfied (bound violated or traces differ).

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedbuff/errors.hpp"
#include "fedbuff/harness.hpp"
#include "fedbuff/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntimeAbort = 2;
constexpr int kExitCheckFailed = 3;

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out_flag, int jobs) {
  const fedbuff::ExperimentConfig cfg = fedbuff::load_config_file(config_path, overrides);
  const fedbuff::ExperimentOutcome outcome =
      fedbuff::run_experiment(cfg, fedbuff::resolve_output_root(out_flag), jobs);

  for (const auto& w : outcome.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  int failed = 0;
  for (const auto& cell : outcome.cells) {
    if (cell.ok) {
      std::printf("ok    seed=%llu T=%lld rows=%lld max_staleness=%lld %s\n",
                  static_cast<unsigned long long>(cell.plan.seed),
                  static_cast<long long>(cell.plan.horizon), static_cast<long long>(cell.rows),
                  static_cast<long long>(cell.max_staleness), cell.metrics_csv.c_str());
    } else {
      ++failed;
      std::printf("abort seed=%llu T=%lld: %s\n",
                  static_cast<unsigned long long>(cell.plan.seed),
                  static_cast<long long>(cell.plan.horizon), cell.error.c_str());
    }
  }
  std::printf("experiment %s fingerprint=%s dir=%s manifest=%s\n",
              failed == 0 ? "ok" : "aborted", outcome.fingerprint.c_str(),
              outcome.experiment_dir.c_str(), outcome.manifest_path.c_str());
  return failed == 0 ? kExitOk : kExitRuntimeAbort;
}

int cmd_verify_bound(const std::string& experiment_dir) {
  const fedbuff::BoundReport report = fedbuff::verify_bound(experiment_dir);
  std::printf("empirical lhs : %.12g +- %.12g (stderr, %d seeds)\n", report.empirical_lhs,
              report.standard_error, report.num_seeds);
  std::printf("bound rhs     : %.12g\n", report.bound_value);
  std::printf("satisfied     : %s  (lhs + 2*stderr <= rhs)\n",
              report.satisfied ? "true" : "false");
  return report.satisfied ? kExitOk : kExitCheckFailed;
}

int cmd_trace_diff(const std::string& log_a, const std::string& log_b) {
  const fedbuff::TraceDiffResult diff = fedbuff::trace_diff(log_a, log_b);
  if (diff.equal) {
    std::printf("equal\n");
    return kExitOk;
  }
  std::printf("divergence at line %lld\n", static_cast<long long>(diff.line));
  std::printf("a: %s\n", diff.line_a.c_str());
  std::printf("b: %s\n", diff.line_b.c_str());
  return kExitCheckFailed;
}

int cmd_fit_rate(const std::string& experiment_dir, double max_slope, bool have_max_slope) {
  const fedbuff::RateFit fit = fedbuff::fit_rate_from_dir(experiment_dir);
  for (size_t i = 0; i < fit.horizons.size(); ++i) {
    std::printf("T=%lld  avg_grad_norm_sq=%.12g\n", static_cast<long long>(fit.horizons[i]),
                fit.time_avg_grad_norm_sq[i]);
  }
  std::printf("log-log slope: %.6f (rms residual %.6f)\n", fit.slope, fit.residual);
  if (have_max_slope && fit.slope > max_slope) {
    std::printf("slope check failed: %.6f > %.6f\n", fit.slope, max_slope);
    return kExitCheckFailed;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic simulator for buffered asynchronous federated learning"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_flag;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--override", overrides, "KEY=VALUE config override (repeatable)");
  run->add_option("--out", out_flag, "output root (default: $FEDBUFF_OUT or .)");
  run->add_option("--jobs", jobs, "parallel cells")->check(CLI::PositiveNumber);

  std::string verify_dir;
  auto* verify = app.add_subcommand("verify-bound", "check the stationarity bound");
  verify->add_option("experiment_dir", verify_dir, "completed experiment directory")
      ->required();

  std::string log_a, log_b;
  auto* diff = app.add_subcommand("trace-diff", "compare two event logs");
  diff->add_option("log_a", log_a)->required();
  diff->add_option("log_b", log_b)->required();

  std::string fit_dir;
  double max_slope = 0.0;
  auto* fit = app.add_subcommand("fit-rate", "fit the log-log convergence rate");
  fit->add_option("experiment_dir", fit_dir)->required();
  auto* slope_opt = fit->add_option("--max-slope", max_slope, "fail when slope exceeds this");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, overrides, out_flag, jobs);
    if (verify->parsed()) return cmd_verify_bound(verify_dir);
    if (diff->parsed()) return cmd_trace_diff(log_a, log_b);
    if (fit->parsed()) return cmd_fit_rate(fit_dir, max_slope, slope_opt->count() > 0);
  } catch (const fedbuff::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const fedbuff::RunAbort& e) {
    std::fprintf(stderr, "abort: %s\n", e.what());
    return kExitRuntimeAbort;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitRuntimeAbort;
  }
  return kExitValidation;
}
