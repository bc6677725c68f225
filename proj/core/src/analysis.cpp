#include "fedbuff/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fedbuff/errors.hpp"

namespace fedbuff {

double stationarity_bound(const BoundInputs& in) {
  if (in.L < 0.0 || in.sigma_hat_sq < 0.0 || in.gamma_sq < 0.0 || in.f0_minus_fstar < 0.0) {
    throw ConfigError("stationarity_bound: inputs must be nonnegative");
  }
  if (in.horizon_T < 1 || in.n < 1 || in.local_steps_q < 1 || in.buffer_size_k < 1 ||
      in.tau < 0) {
    throw ConfigError("stationarity_bound: invalid integer inputs");
  }
  const double sqrt_l = std::sqrt(in.L);
  const double sqrt_t = std::sqrt(static_cast<double>(in.horizon_T));
  const double t = static_cast<double>(in.horizon_T);
  const double q = static_cast<double>(in.local_steps_q);
  const double tau = static_cast<double>(in.tau);
  const double n = static_cast<double>(in.n);

  const double term1 = 8.0 * sqrt_l * in.f0_minus_fstar / sqrt_t;
  const double term2 = 16.0 * sqrt_l * (in.sigma_hat_sq + in.gamma_sq) / sqrt_t;
  const double term3 =
      320.0 * in.L * (q + 1.0) * (tau * tau + 1.0) * (in.sigma_hat_sq + n * in.gamma_sq) / t;
  return term1 + term2 + term3;
}

int64_t min_horizon(double L, int64_t local_steps_q, int64_t tau) {
  if (!(L > 0.0) || local_steps_q < 1 || tau < 0) {
    throw ConfigError("min_horizon: need L > 0, Q >= 1, tau >= 0");
  }
  const double tau1 = static_cast<double>(tau) + 1.0;
  const double v = 160.0 * L * (static_cast<double>(local_steps_q) + 7.0) * tau1 * tau1 * tau1;
  return static_cast<int64_t>(std::ceil(v));
}

Schedule auto_schedule(double L, int64_t local_steps_q, int64_t buffer_size_k,
                       int64_t horizon_T) {
  if (!(L > 0.0) || horizon_T < 1 || local_steps_q < 1 || buffer_size_k < 1) {
    throw ConfigError("auto_schedule: need L > 0, T >= 1, Q >= 1, K >= 1");
  }
  Schedule s;
  s.eta = 1.0 / (static_cast<double>(local_steps_q) *
                 std::sqrt(L * static_cast<double>(horizon_T)));
  s.beta = 1.0 / static_cast<double>(buffer_size_k);
  if (horizon_T >= min_horizon(L, local_steps_q, 0)) {
    const double cap = 1.0 / (4.0 * L * (static_cast<double>(local_steps_q) + 1.0));
    if (s.eta > cap) {
      throw std::logic_error("auto_schedule: eta exceeds the smoothness cap despite T >= "
                             "min_horizon; schedule derivation is inconsistent");
    }
  }
  return s;
}

namespace {

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Standard error of the mean (sample std / sqrt(N)).
double stderr_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(xs.size() - 1);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

AggregateCurve aggregate_curves(std::span<const std::vector<double>> per_seed) {
  if (per_seed.size() < 2) throw ConfigError("aggregate: need >= 2 seed curves");
  const size_t t_len = per_seed.front().size();
  if (t_len == 0) throw ConfigError("aggregate: empty curves");
  for (const auto& c : per_seed) {
    if (c.size() != t_len) throw ConfigError("aggregate: mismatched horizons across seeds");
  }

  AggregateCurve out;
  out.horizon = static_cast<int64_t>(t_len);
  out.num_seeds = static_cast<int>(per_seed.size());
  out.mean_grad_norm_sq.resize(t_len);
  out.stderr_grad_norm_sq.resize(t_len);

  std::vector<double> column(per_seed.size());
  for (size_t t = 0; t < t_len; ++t) {
    for (size_t s = 0; s < per_seed.size(); ++s) column[s] = per_seed[s][t];
    const double m = mean_of(column);
    out.mean_grad_norm_sq[t] = m;
    out.stderr_grad_norm_sq[t] = stderr_of(column, m);
  }

  std::vector<double> time_avgs(per_seed.size());
  for (size_t s = 0; s < per_seed.size(); ++s) time_avgs[s] = mean_of(per_seed[s]);
  out.time_avg_mean = mean_of(time_avgs);
  out.time_avg_stderr = stderr_of(time_avgs, out.time_avg_mean);
  return out;
}

AggregateCurve aggregate_runs(std::span<const RunRecord> records) {
  if (records.size() < 2) throw ConfigError("aggregate_runs: need >= 2 records");
  const int64_t horizon = records.front().horizon;
  const std::string& algo = records.front().algorithm;
  for (const auto& r : records) {
    if (r.horizon != horizon) throw ConfigError("aggregate_runs: mismatched horizons");
    if (r.algorithm != algo) throw ConfigError("aggregate_runs: mismatched algorithms");
    if (static_cast<int64_t>(r.rows.size()) != horizon) {
      throw ConfigError("aggregate_runs: incomplete record (rows != horizon)");
    }
  }

  // Sort by seed so the floating-point reduction order is independent of the
  // caller's list order.
  std::vector<const RunRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const RunRecord* a, const RunRecord* b) { return a->run_seed < b->run_seed; });

  std::vector<std::vector<double>> curves(sorted.size());
  for (size_t s = 0; s < sorted.size(); ++s) {
    curves[s].resize(static_cast<size_t>(horizon));
    for (size_t t = 0; t < static_cast<size_t>(horizon); ++t) {
      curves[s][t] = sorted[s]->rows[t].grad_norm_sq;
    }
  }
  return aggregate_curves(curves);
}

RateFit fit_rate(std::span<const int64_t> horizons, std::span<const double> avg_grad_norm_sq) {
  if (horizons.size() != avg_grad_norm_sq.size()) {
    throw ConfigError("fit_rate: horizons and averages must align");
  }
  if (horizons.size() < 4) throw ConfigError("fit_rate: need >= 4 horizons");
  for (size_t i = 1; i < horizons.size(); ++i) {
    if (horizons[i] <= horizons[i - 1]) {
      throw ConfigError("fit_rate: horizons must be strictly increasing");
    }
  }

  RateFit fit;
  fit.horizons.assign(horizons.begin(), horizons.end());
  fit.time_avg_grad_norm_sq.assign(avg_grad_norm_sq.begin(), avg_grad_norm_sq.end());

  const size_t m = horizons.size();
  std::vector<double> xs(m), ys(m);
  for (size_t i = 0; i < m; ++i) {
    if (!(avg_grad_norm_sq[i] > 0.0)) {
      throw ConfigError("fit_rate: averages must be positive for a log-log fit");
    }
    xs[i] = std::log(static_cast<double>(horizons[i]));
    ys[i] = std::log(avg_grad_norm_sq[i]);
  }
  const double xbar = mean_of(xs);
  const double ybar = mean_of(ys);
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < m; ++i) {
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
  }
  fit.slope = sxy / sxx;

  const double intercept = ybar - fit.slope * xbar;
  double ss = 0.0;
  for (size_t i = 0; i < m; ++i) {
    const double r = ys[i] - (intercept + fit.slope * xs[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(m));
  return fit;
}

}  // namespace fedbuff
