// Acceptance suite: end-to-end checks of the simulator, the reference
// degenerations, the assumption certificates, and the convergence bound.
// Prints one PASS/FAIL line per criterion; exits nonzero if any fail.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fedbuff/analysis.hpp"
#include "fedbuff/baselines.hpp"
#include "fedbuff/config.hpp"
#include "fedbuff/errors.hpp"
#include "fedbuff/harness.hpp"
#include "fedbuff/io.hpp"
#include "fedbuff/objectives.hpp"
#include "fedbuff/simulator.hpp"
#include "test_support.hpp"

using namespace fedbuff;
namespace fs = std::filesystem;

namespace {

struct Reporter {
  int failed = 0;
  int passed = 0;

  void run(int number, const std::string& title, const std::function<void()>& body) {
    try {
      body();
      ++passed;
      std::printf("PASS  criterion %d: %s\n", number, title.c_str());
    } catch (const std::exception& e) {
      ++failed;
      std::printf("FAIL  criterion %d: %s\n      %s\n", number, title.c_str(), e.what());
    }
  }
};

void require(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

// The quantitative-bound problem: quadratic mixture with every constant
// analytic. scale = L = 0.01 keeps the minimum horizon at desk scale.
ExperimentConfig bound_config() {
  ExperimentConfig cfg;
  cfg.name = "accept_bound";
  cfg.output_dir = "accept_bound";
  cfg.algorithm = Algorithm::FedBuff;
  cfg.problem.family = Family::QuadraticMixture;
  cfg.problem.n = 4;
  cfg.problem.d = 4;
  cfg.problem.scale = 0.01;
  cfg.problem.heterogeneity_shift = 1.0;
  cfg.problem.dispersion = 1.0;
  cfg.problem.points_per_client = 8;
  cfg.problem.seed = 42;
  cfg.hyper.local_steps_q = 2;
  cfg.hyper.buffer_size_k = 2;
  cfg.hyper.batch_size = 4;
  cfg.auto_eta = true;
  cfg.auto_beta = true;
  cfg.sim.mode = SimMode::UniformArrival;
  cfg.sim.tau_max = 1;
  cfg.sim.staleness_mode = StalenessMode::Enforce;
  cfg.init_scale = 1.0;
  return cfg;
}

int64_t run_criterion_1(const std::string& root) {
  ExperimentConfig cfg = bound_config();
  const int64_t horizon = min_horizon(cfg.problem.scale, cfg.hyper.local_steps_q, cfg.sim.tau_max);
  require(horizon == 116, "expected minimum horizon 116, got " + std::to_string(horizon));
  cfg.horizons = {horizon};
  for (uint64_t s = 1; s <= 32; ++s) cfg.seeds.push_back(s);

  const ExperimentOutcome out = run_experiment(cfg, root, 4);
  require(out.all_ok, "bound experiment had aborted cells");

  int64_t max_staleness = 0;
  for (const auto& cell : out.cells) {
    max_staleness = std::max(max_staleness, cell.max_staleness);
  }
  require(max_staleness <= cfg.sim.tau_max, "staleness exceeded tau in the bound runs");

  const BoundReport report = verify_bound(out.experiment_dir);
  std::printf("      lhs=%.6g +- %.3g (32 seeds), rhs=%.6g\n", report.empirical_lhs,
              report.standard_error, report.bound_value);
  require(report.satisfied, "empirical average + 2 stderr exceeds the bound");
  return max_staleness;
}

struct ScenarioParams {
  Problem problem;
  HyperParams hp;
  SimConfig sim;
};

ScenarioParams k1_scenario(int which) {
  const int n = std::vector<int>{2, 5, 10}[static_cast<size_t>(which % 3)];
  ProblemSpec s;
  s.family = Family::QuadraticMixture;
  s.n = n;
  s.d = 2 + which % 2;
  s.scale = 0.2;
  s.heterogeneity_shift = 0.7;
  s.points_per_client = 4;
  s.dispersion = 0.4;
  s.seed = 1000 + static_cast<uint64_t>(which);

  ScenarioParams sp{Problem::generate(s), {}, {}};
  sp.hp.local_steps_q = 1 + which % 3;
  sp.hp.eta = 0.1;
  sp.hp.beta = 0.5;
  sp.hp.buffer_size_k = 1;
  sp.hp.batch_size = 2;

  sp.sim.mode = SimMode::EventDriven;
  sp.sim.horizon_T = 25;
  sp.sim.seed = 5000 + static_cast<uint64_t>(which);
  sp.sim.tau_max = 64;  // generous; enforcement stays active
  sp.sim.staleness_mode = StalenessMode::Enforce;
  switch (which % 4) {
    case 0:
      sp.sim.delay.download = DelaySpec::deterministic({0.0});
      sp.sim.delay.upload = DelaySpec::deterministic({1.0});
      break;
    case 1:
      sp.sim.delay.download = DelaySpec::uniform_int(0, 3);
      sp.sim.delay.upload = DelaySpec::uniform_int(1, 4);
      break;
    case 2:
      sp.sim.delay.download = DelaySpec::geometric(0.5, 4);
      sp.sim.delay.upload = DelaySpec::geometric(0.4, 6);
      break;
    default: {
      std::vector<double> down, up;
      for (int c = 0; c < n; ++c) {
        down.push_back(static_cast<double>(c % 3));
        up.push_back(1.0 + static_cast<double>((c * 2) % 4));
      }
      sp.sim.delay.download = DelaySpec::deterministic(down);
      sp.sim.delay.upload = DelaySpec::deterministic(up);
      break;
    }
  }
  return sp;
}

int64_t run_criterion_2() {
  int64_t max_staleness = 0;
  for (int which = 0; which < 20; ++which) {
    ScenarioParams sp = k1_scenario(which);

    std::ostringstream log_a, log_b;
    EventLogWriter wa(log_a), wb(log_b);
    const RunRecord buffered = run_simulation(sp.problem, sp.hp, sp.sim, RunSinks{&wa});
    const RunRecord reference = run_pure_async(sp.problem, sp.hp, sp.sim, RunSinks{&wb});

    require(log_a.str() == log_b.str(),
            "event logs diverge in scenario " + std::to_string(which));
    require(buffered.model_hash_per_step == reference.model_hash_per_step,
            "model trajectories diverge in scenario " + std::to_string(which));
    require(buffered.final_model == reference.final_model,
            "final models diverge in scenario " + std::to_string(which));
    require(buffered.rows.size() == reference.rows.size(), "row counts diverge");
    for (size_t i = 0; i < buffered.rows.size(); ++i) {
      require(buffered.rows[i].grad_norm_sq == reference.rows[i].grad_norm_sq &&
                  buffered.rows[i].f_value == reference.rows[i].f_value,
              "metric rows diverge in scenario " + std::to_string(which));
    }
    max_staleness = std::max(max_staleness, buffered.audit.max_staleness());
    require(buffered.audit.max_staleness() <= sp.sim.tau_max, "staleness exceeded tau");
  }
  return max_staleness;
}

void run_criterion_3() {
  for (int which = 0; which < 10; ++which) {
    const int n = 2 + which % 5;
    ProblemSpec s;
    s.family = Family::QuadraticMixture;
    s.n = n;
    s.d = 2 + which % 3;
    s.scale = 0.3;
    s.heterogeneity_shift = 0.6;
    s.points_per_client = 4;
    s.dispersion = 0.5;
    s.seed = 2000 + static_cast<uint64_t>(which);
    const Problem problem = Problem::generate(s);

    HyperParams hp;
    hp.local_steps_q = 1 + which % 3;
    hp.eta = 0.1;
    hp.beta = 1.0 / n;
    hp.buffer_size_k = n;
    hp.batch_size = 2;

    SimConfig sim;
    sim.mode = SimMode::EventDriven;
    sim.horizon_T = 9;
    sim.seed = 7000 + static_cast<uint64_t>(which);
    sim.tau_max = 0;  // synchronized dispatch keeps staleness at zero
    sim.staleness_mode = StalenessMode::Enforce;

    const RunRecord buffered = run_simulation(problem, hp, sim);

    SyncRoundConfig cfg;
    cfg.clients_per_round = n;
    cfg.aggregation_weight = 1.0 / n;
    const RunRecord fedavg = run_fedavg_sync(problem, hp, cfg, sim.horizon_T, sim.seed);

    require(buffered.model_hash_per_step == fedavg.model_hash_per_step,
            "per-round models diverge in scenario " + std::to_string(which));
    require(buffered.final_model == fedavg.final_model, "final models diverge");
    require(buffered.audit.max_staleness() == 0, "synchronized run saw staleness");
    require(fedavg.audit.max_staleness() == 0, "fedavg audit must be zero");
  }
}

void run_criterion_4(int64_t observed_max_c1, int64_t observed_max_c2) {
  require(observed_max_c1 <= 1, "criterion-1 runs exceeded tau=1");
  require(observed_max_c2 <= 64, "criterion-2 runs exceeded tau=64");

  // hand-built straggler: client 1's first upload lands one flush late
  const Problem p = Problem::quadratic_from_points(1.0, {{{1.0}}, {{-1.0}}});
  HyperParams hp;
  hp.local_steps_q = 1;
  hp.eta = 0.1;
  hp.beta = 0.5;
  hp.buffer_size_k = 2;
  hp.full_batch = true;
  SimConfig sim;
  sim.mode = SimMode::EventDriven;
  sim.horizon_T = 2;
  sim.seed = 3;
  sim.delay.download = DelaySpec::deterministic({0.0, 0.0});
  sim.delay.upload = DelaySpec::deterministic({1.0, 2.5});

  sim.tau_max = 1;
  const RunRecord ok = run_simulation(p, hp, sim);
  require(ok.audit.max_staleness() == 1, "straggler scenario should reach staleness 1");

  sim.tau_max = 0;
  bool aborted = false;
  try {
    run_simulation(p, hp, sim);
  } catch (const RunAbort&) {
    aborted = true;
  }
  require(aborted, "tau=0 straggler run must abort");
}

void run_criterion_5() {
  std::vector<Problem> problems;
  {
    ProblemSpec s;
    s.family = Family::QuadraticMixture;
    s.n = 4;
    s.d = 4;
    s.scale = 0.01;
    s.heterogeneity_shift = 1.0;
    s.dispersion = 1.0;
    s.points_per_client = 8;
    s.seed = 42;
    problems.push_back(Problem::generate(s));
    s.family = Family::LogisticNonconvex;
    s.d = 3;
    s.n = 3;
    s.regularizer_weight = 0.05;
    s.points_per_client = 6;
    problems.push_back(Problem::generate(s));
  }

  for (const Problem& p : problems) {
    RngStream rng(161803);
    for (int trial = 0; trial < 100; ++trial) {
      const int client = static_cast<int>(rng.uniform_u64(static_cast<uint64_t>(p.n())));
      ParamVector w(static_cast<size_t>(p.dim()));
      for (auto& x : w) x = rng.uniform_real(-3.0, 3.0);
      const ParamVector g = p.full_gradient(client, w);
      ParamVector fd(w.size());
      for (size_t j = 0; j < w.size(); ++j) {
        ParamVector wp = w, wm = w;
        wp[j] += 1e-5;
        wm[j] -= 1e-5;
        fd[j] = (p.client_value(client, wp) - p.client_value(client, wm)) / 2e-5;
      }
      require(norm(sub(fd, g)) <= 1e-5 * (1.0 + norm(g)),
              "finite-difference mismatch beyond 1e-5");
    }

    // unbiasedness and variance of single-sample batches at a fixed probe
    ParamVector w(static_cast<size_t>(p.dim()), 0.5);
    const ParamVector full = p.full_gradient(0, w);
    const std::vector<ParamVector> probe = {w};
    const double exact_var = p.estimate_variance(0, probe);

    RngStream rng_mc = derive_stream(9001, StreamTag::kBatch, {0, 0});
    const int draws = 100000;
    ParamVector mean_acc(w.size(), 0.0);
    ParamVector var_acc(w.size(), 0.0);
    double dev_sum = 0.0, dev_sq_sum = 0.0;
    for (int i = 0; i < draws; ++i) {
      const ParamVector g = p.stochastic_gradient(0, w, 1, rng_mc);
      for (size_t j = 0; j < w.size(); ++j) {
        mean_acc[j] += g[j];
        var_acc[j] += (g[j] - full[j]) * (g[j] - full[j]);
      }
      const double dev = dist_sq(g, full);
      dev_sum += dev;
      dev_sq_sum += dev * dev;
    }
    for (size_t j = 0; j < w.size(); ++j) {
      const double mean = mean_acc[j] / draws;
      const double se = std::sqrt(var_acc[j] / draws / draws);
      require(std::abs(mean - full[j]) <= 3.0 * se + 1e-12,
              "stochastic gradient biased beyond 3 standard errors");
    }
    const double dev_mean = dev_sum / draws;
    const double dev_se = std::sqrt((dev_sq_sum / draws - dev_mean * dev_mean) / draws);
    require(std::abs(dev_mean - exact_var) <= 3.0 * dev_se,
            "empirical variance off the exact value beyond 3 standard errors");
    require(exact_var <= p.constants().sigma_sq + 1e-12, "exact variance above sigma^2");

    // batch size 4 reduces the bound to sigma^2/4
    RngStream rng_b4 = derive_stream(9002, StreamTag::kBatch, {0, 1});
    double b4_sum = 0.0, b4_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double dev = dist_sq(p.stochastic_gradient(0, w, 4, rng_b4), full);
      b4_sum += dev;
      b4_sq += dev * dev;
    }
    const double b4_mean = b4_sum / draws;
    const double b4_se = std::sqrt((b4_sq / draws - b4_mean * b4_mean) / draws);
    require(b4_mean <= p.constants().sigma_sq / 4.0 + 3.0 * b4_se,
            "batch variance above sigma^2/b");
  }
}

void run_criterion_6() {
  ProblemSpec qs;
  qs.family = Family::QuadraticMixture;
  qs.n = 4;
  qs.d = 4;
  qs.scale = 0.01;
  qs.heterogeneity_shift = 1.0;
  qs.dispersion = 1.0;
  qs.points_per_client = 8;
  qs.seed = 42;
  ProblemSpec ls = qs;
  ls.family = Family::LogisticNonconvex;
  ls.d = 3;
  ls.n = 3;
  ls.regularizer_weight = 0.05;
  ls.points_per_client = 6;

  for (const ProblemSpec& s : {qs, ls}) {
    const Problem p = Problem::generate(s);
    const double L = p.constants().L;
    RngStream rng(299792458);
    for (int trial = 0; trial < 10000; ++trial) {
      const int client = static_cast<int>(rng.uniform_u64(static_cast<uint64_t>(p.n())));
      ParamVector w(static_cast<size_t>(p.dim())), u(static_cast<size_t>(p.dim()));
      for (auto& x : w) x = rng.uniform_real(-5.0, 5.0);
      for (auto& x : u) x = rng.uniform_real(-5.0, 5.0);
      const double lhs = norm(sub(p.full_gradient(client, w), p.full_gradient(client, u)));
      require(lhs <= L * std::sqrt(dist_sq(w, u)) + 1e-9, "smoothness violated");
    }

    const auto probes = make_probe_points(p.dim(), 5.0, 100, 271);
    require(p.measure_diversity(probes) <= p.constants().gamma_sq + 1e-9,
            "measured diversity above gamma^2");
  }
}

void run_criterion_7(const std::string& root) {
  ExperimentConfig cfg = bound_config();
  cfg.name = "accept_rate";
  cfg.output_dir = "accept_rate";
  cfg.horizons = {128, 256, 512, 1024, 2048};
  for (uint64_t s = 1; s <= 20; ++s) cfg.seeds.push_back(s);

  const ExperimentOutcome out = run_experiment(cfg, root, 4);
  require(out.all_ok, "rate sweep had aborted cells");
  const RateFit fit = fit_rate_from_dir(out.experiment_dir);
  std::printf("      slope=%.4f residual=%.4f\n", fit.slope, fit.residual);
  require(fit.slope <= -0.35, "log-log slope " + std::to_string(fit.slope) + " above -0.35");
}

void run_criterion_8(const std::string& root) {
  ExperimentConfig cfg = bound_config();
  cfg.name = "accept_det";
  cfg.output_dir = "accept_det";
  cfg.emit_event_log = true;
  cfg.seeds = {11, 12};
  cfg.horizons = {116};
  const ExperimentOutcome a = run_experiment(cfg, root + "/det_a", 1);
  const ExperimentOutcome b = run_experiment(cfg, root + "/det_b", 2);  // parallel must not matter
  require(a.all_ok && b.all_ok, "determinism runs aborted");
  require(a.fingerprint == b.fingerprint, "experiment fingerprints differ");
  require(a.cells.size() == b.cells.size(), "cell counts differ");
  for (size_t i = 0; i < a.cells.size(); ++i) {
    require(a.cells[i].plan.fingerprint == b.cells[i].plan.fingerprint,
            "cell fingerprints differ");
    const std::string csv_a =
        read_file((fs::path(a.experiment_dir) / a.cells[i].metrics_csv).string());
    const std::string csv_b =
        read_file((fs::path(b.experiment_dir) / b.cells[i].metrics_csv).string());
    require(csv_a == csv_b, "metrics CSVs differ between reruns");
    const std::string log_a =
        read_file((fs::path(a.experiment_dir) / a.cells[i].event_log).string());
    const std::string log_b =
        read_file((fs::path(b.experiment_dir) / b.cells[i].event_log).string());
    require(log_a == log_b, "event logs differ between reruns");
  }
}

}  // namespace

int main() {
  test::TempDir scratch;
  Reporter r;

  int64_t max_staleness_c1 = 0;
  int64_t max_staleness_c2 = 0;

  r.run(1, "stationarity bound holds on the assumption-faithful quadratic run",
        [&] { max_staleness_c1 = run_criterion_1(scratch.str()); });
  r.run(2, "K=1 runs are bitwise identical to the pure-async reference",
        [&] { max_staleness_c2 = run_criterion_2(); });
  r.run(3, "K=n zero-delay runs match synchronous FedAvg round for round",
        [] { run_criterion_3(); });
  r.run(4, "staleness never exceeds tau in enforce mode; tau=0 straggler aborts",
        [&] { run_criterion_4(max_staleness_c1, max_staleness_c2); });
  r.run(5, "gradient oracles: finite differences, unbiasedness, variance bound",
        [] { run_criterion_5(); });
  r.run(6, "assumption certificates: smoothness and diversity bounds",
        [] { run_criterion_6(); });
  r.run(7, "time-averaged gradient norm decays with slope <= -0.35",
        [&] { run_criterion_7(scratch.str()); });
  r.run(8, "identical configs reproduce byte-identical artifacts",
        [&] { run_criterion_8(scratch.str()); });

  std::printf("%d/%d acceptance criteria passed\n", r.passed, r.passed + r.failed);
  return r.failed == 0 ? 0 : 1;
}
