#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedbuff/run_record.hpp"

namespace fedbuff {

// Everything the stationarity bound consumes. sigma_hat_sq is the
// batch-reduced variance sigma^2/b; f0_minus_fstar is f(w^0) - f*.
struct BoundInputs {
  double L = 0.0;
  double sigma_hat_sq = 0.0;
  double gamma_sq = 0.0;
  double f0_minus_fstar = 0.0;
  int64_t n = 1;
  int64_t local_steps_q = 1;
  int64_t buffer_size_k = 1;
  int64_t tau = 0;
  int64_t horizon_T = 1;
};

// Upper bound on the horizon-averaged expected squared gradient norm of the
// buffered asynchronous run under the schedule beta = 1/K,
// eta = 1/(Q sqrt(LT)):
//   8 sqrt(L) (f(w0)-f*) / sqrt(T)
// + 16 sqrt(L) (sigma^2/b + gamma^2) / sqrt(T)
// + 320 L (Q+1)(tau^2+1)(sigma^2/b + n gamma^2) / T
double stationarity_bound(const BoundInputs& in);

// Smallest horizon the bound is stated for: ceil(160 L (Q+7)(tau+1)^3).
int64_t min_horizon(double L, int64_t local_steps_q, int64_t tau);

struct Schedule {
  double eta = 0.0;
  double beta = 0.0;
};

// beta = 1/K, eta = 1/(Q sqrt(LT)). Checks that whenever T clears
// min_horizon(L, Q, 0), eta also satisfies eta <= 1/(4L(Q+1)), the cap the
// derivation needs.
Schedule auto_schedule(double L, int64_t local_steps_q, int64_t buffer_size_k, int64_t horizon_T);

struct AggregateCurve {
  int64_t horizon = 0;
  int num_seeds = 0;
  std::vector<double> mean_grad_norm_sq;    // per-step mean across seeds
  std::vector<double> stderr_grad_norm_sq;  // per-step standard error
  double time_avg_mean = 0.0;    // mean over seeds of per-seed time averages
  double time_avg_stderr = 0.0;  // standard error of that mean
};

// Multi-seed Monte-Carlo estimate of the expected per-step gradient norms.
// Records are sorted by seed internally, so the result is independent of
// input order. Requires >= 2 records sharing horizon and algorithm.
AggregateCurve aggregate_runs(std::span<const RunRecord> records);

// Same aggregation from bare per-seed curves (e.g. parsed back from CSVs).
AggregateCurve aggregate_curves(std::span<const std::vector<double>> per_seed_grad_norm_sq);

struct RateFit {
  std::vector<int64_t> horizons;
  std::vector<double> time_avg_grad_norm_sq;
  double slope = 0.0;     // log-log least squares
  double residual = 0.0;  // RMS residual of the fit
};

// Least-squares slope of log(avg grad norm^2) against log(T). Needs >= 4
// strictly increasing horizons and positive averages.
RateFit fit_rate(std::span<const int64_t> horizons, std::span<const double> avg_grad_norm_sq);

}  // namespace fedbuff
