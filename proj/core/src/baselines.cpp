#include "fedbuff/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>

#include "fedbuff/errors.hpp"
#include "fedbuff/io.hpp"

namespace fedbuff {

namespace {

// Partial Fisher-Yates; result order is the draw order. Full participation
// keeps natural client order 0..n-1, which is also the arrival order the
// zero-delay buffered run produces.
std::vector<int> sample_without_replacement(int n, int k, RngStream& rng) {
  std::vector<int> pool(static_cast<size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  if (k >= n) return pool;
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_u64(static_cast<uint64_t>(n - i)));
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }
  pool.resize(static_cast<size_t>(k));
  return pool;
}

}  // namespace

RunRecord run_fedavg_sync(const Problem& problem, const HyperParams& hp,
                          const SyncRoundConfig& cfg, int64_t rounds, uint64_t seed,
                          ParamVector initial_model) {
  validate_hyper(hp, problem.n());
  const int n = problem.n();
  if (cfg.clients_per_round < 1 || cfg.clients_per_round > n) {
    throw ConfigError("fedavg.clients_per_round: must be in [1, n]");
  }
  if (!(cfg.aggregation_weight > 0.0)) {
    throw ConfigError("fedavg.aggregation_weight: must be > 0");
  }
  if (rounds < 1) throw ConfigError("rounds: must be >= 1");

  RunRecord record;
  record.algorithm = "fedavg_sync";
  record.run_seed = seed;
  record.horizon = rounds;
  record.audit = StalenessAudit(StalenessMode::Enforce, 0);

  ParamVector model =
      initial_model.empty() ? default_initial_model(problem) : std::move(initial_model);
  check_dim(model, static_cast<size_t>(problem.dim()), "run_fedavg_sync");

  std::vector<int64_t> round_index(static_cast<size_t>(n), 0);
  int64_t uploads = 0;

  for (int64_t round = 0; round < rounds; ++round) {
    const double g2 = norm_sq(problem.global_gradient(model));
    const double fv = problem.global_value(model);

    std::vector<int> selected;
    if (cfg.clients_per_round == n) {
      selected.resize(static_cast<size_t>(n));
      std::iota(selected.begin(), selected.end(), 0);
    } else {
      RngStream rng =
          derive_stream(seed, StreamTag::kSample, {static_cast<uint64_t>(round)});
      selected = sample_without_replacement(n, cfg.clients_per_round, rng);
    }

    ParamVector sum = zeros(model.size());
    for (int client : selected) {
      ClientUpdate u = run_client_round(problem, client, model, round, hp, seed,
                                        round_index[static_cast<size_t>(client)]);
      ++round_index[static_cast<size_t>(client)];
      ++uploads;
      record.audit.record(client, round, round);  // barrier: staleness always 0
      add_inplace(sum, u.delta);
    }
    axpy_inplace(model, -cfg.aggregation_weight, sum);
    if (!all_finite(model)) {
      throw RunAbort("run_fedavg_sync: non-finite model after round " + std::to_string(round));
    }

    record.rows.push_back({round, g2, fv, record.audit.max_staleness(), uploads, uploads});
    record.model_hash_per_step.push_back(hash_doubles(model));
  }

  record.total_uploads = uploads;
  record.total_events = uploads;
  record.final_model = std::move(model);
  record.final_model_hash = hash_doubles(record.final_model);
  return record;
}

namespace {

// Applies every upload immediately: w -= beta * delta, one server step per
// upload. Staleness still accrues through upload delays.
class ImmediateApplyHandler : public UploadHandler {
 public:
  ImmediateApplyHandler(const Problem& problem, const HyperParams& hp, const SimConfig& sim,
                        ParamVector w0, RunRecord& record)
      : hp_(hp), problem_(problem), horizon_(sim.horizon_T), model_(std::move(w0)),
        record_(record) {
    record_.audit = StalenessAudit(sim.staleness_mode, sim.tau_max);
    observe_model();
  }

  int64_t current_step() const override { return step_; }
  const ParamVector& model() const override { return model_; }

  void handle_upload(const ClientUpdate& update, int64_t uploads_so_far,
                     int64_t events_so_far) override {
    if (!all_finite(update.delta)) {
      throw RunAbort("run_pure_async: non-finite delta from client " +
                     std::to_string(update.client_id) + " at server step " +
                     std::to_string(step_));
    }
    record_.audit.record(update.client_id, update.download_step, step_);
    axpy_inplace(model_, -hp_.beta, update.delta);
    if (!all_finite(model_)) {
      throw RunAbort("run_pure_async: non-finite model at server step " +
                     std::to_string(step_));
    }
    record_.rows.push_back({step_, cached_g2_, cached_f_, record_.audit.max_staleness(),
                            uploads_so_far, events_so_far});
    record_.model_hash_per_step.push_back(hash_doubles(model_));
    ++step_;
    if (step_ < horizon_) observe_model();
  }

  const ParamVector& final_model() const { return model_; }

 private:
  void observe_model() {
    cached_g2_ = norm_sq(problem_.global_gradient(model_));
    cached_f_ = problem_.global_value(model_);
  }

  const HyperParams& hp_;
  const Problem& problem_;
  int64_t horizon_;
  ParamVector model_;
  RunRecord& record_;
  int64_t step_ = 0;
  double cached_g2_ = 0.0;
  double cached_f_ = 0.0;
};

}  // namespace

RunRecord run_pure_async(const Problem& problem, const HyperParams& hp, const SimConfig& sim,
                         const RunSinks& sinks, ParamVector initial_model) {
  validate_hyper(hp, problem.n());
  if (sim.mode != SimMode::EventDriven) {
    throw ConfigError("run_pure_async: requires EventDriven mode");
  }
  sim.validate(problem.n(), 1);
  if (initial_model.empty()) initial_model = default_initial_model(problem);
  check_dim(initial_model, static_cast<size_t>(problem.dim()), "run_pure_async");

  RunRecord record;
  record.algorithm = "pure_async";
  record.run_seed = sim.seed;
  record.horizon = sim.horizon_T;
  ImmediateApplyHandler handler(problem, hp, sim, std::move(initial_model), record);
  const EventLoopStats stats = drive_event_loop(problem, hp, sim, handler, sinks.event_log);
  record.total_uploads = stats.uploads;
  record.total_events = stats.events;
  record.final_model = handler.final_model();
  record.final_model_hash = hash_doubles(record.final_model);
  return record;
}

}  // namespace fedbuff
