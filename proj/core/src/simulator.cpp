#include "fedbuff/simulator.hpp"

#include <algorithm>
#include <string>

#include "fedbuff/errors.hpp"

namespace fedbuff {

std::string sim_mode_name(SimMode m) {
  return m == SimMode::EventDriven ? "event_driven" : "uniform_arrival";
}

SimMode sim_mode_from_name(const std::string& name) {
  if (name == "event_driven") return SimMode::EventDriven;
  if (name == "uniform_arrival") return SimMode::UniformArrival;
  throw ConfigError("sim.mode: unknown mode '" + name + "'");
}

std::string staleness_mode_name(StalenessMode m) {
  return m == StalenessMode::Enforce ? "enforce" : "observe";
}

StalenessMode staleness_mode_from_name(const std::string& name) {
  if (name == "enforce") return StalenessMode::Enforce;
  if (name == "observe") return StalenessMode::Observe;
  throw ConfigError("sim.staleness_mode: unknown mode '" + name + "'");
}

std::vector<std::string> SimConfig::validate(int n, int64_t buffer_size_k) const {
  if (horizon_T < 1) throw ConfigError("sim.horizon_T: must be >= 1");
  if (tau_max < 0) throw ConfigError("sim.tau_max: must be >= 0");
  if (n < 1) throw ConfigError("sim.n: must be >= 1");
  std::vector<std::string> warnings;
  if (mode == SimMode::EventDriven) {
    delay.validate(n);
    const int64_t bound = delay.staleness_upper_bound(n, buffer_size_k);
    if (staleness_mode == StalenessMode::Enforce) {
      if (bound < 0) {
        warnings.push_back(
            "sim.delay: no finite staleness bound provable for this delay model; "
            "relying on runtime enforcement");
      } else if (bound > tau_max) {
        warnings.push_back("sim.delay: conservative staleness bound " + std::to_string(bound) +
                           " exceeds tau_max " + std::to_string(tau_max) +
                           "; runs may abort on a violation");
      }
    }
  }
  return warnings;
}

int sample_arrival_uniform(RngStream& rng, int n) {
  return static_cast<int>(rng.uniform_u64(static_cast<uint64_t>(n)));
}

ClientUpdate run_client_round(const Problem& problem, int client,
                              const ParamVector& snapshot, int64_t snapshot_step,
                              const HyperParams& hp, uint64_t run_seed, int64_t round_index) {
  RngStream batch_rng =
      derive_stream(run_seed, StreamTag::kBatch,
                    {static_cast<uint64_t>(client), static_cast<uint64_t>(round_index)});
  ClientState st = client_begin_round(client, snapshot, snapshot_step);
  const int64_t batch = hp.full_batch ? 0 : hp.batch_size;
  const GradOracle oracle = [&](const ParamVector& w, RngStream& rng) {
    return problem.stochastic_gradient(client, w, batch, rng);
  };
  for (int64_t q = 0; q < hp.local_steps_q; ++q) {
    client_local_step(st, hp, oracle, batch_rng);
  }
  return client_finish_round(st, hp);
}

namespace {

// Shared row/trajectory bookkeeping for any server-side policy. Metrics for
// w^t are computed when step t becomes current (cheaply cached) and the row
// is finalized by the flush that consumes step t.
class MetricsRecorder {
 public:
  MetricsRecorder(const Problem& problem, RunRecord& record, int64_t horizon)
      : problem_(problem), record_(record), horizon_(horizon) {}

  void observe_model(const ParamVector& w, int64_t step) {
    if (step >= horizon_) return;  // final model's metrics are out of range
    cached_g2_ = norm_sq(problem_.global_gradient(w));
    cached_f_ = problem_.global_value(w);
  }

  void on_flush(int64_t step, const ParamVector& new_model, const StalenessAudit& audit,
                int64_t uploads_so_far, int64_t events_so_far) {
    record_.rows.push_back({step, cached_g2_, cached_f_, audit.max_staleness(), uploads_so_far,
                            events_so_far});
    record_.model_hash_per_step.push_back(hash_doubles(new_model));
    observe_model(new_model, step + 1);
  }

 private:
  const Problem& problem_;
  RunRecord& record_;
  int64_t horizon_;
  double cached_g2_ = 0.0;
  double cached_f_ = 0.0;
};

class FedBuffHandler : public UploadHandler {
 public:
  FedBuffHandler(const Problem& problem, const HyperParams& hp, const SimConfig& sim,
                 ParamVector w0, RunRecord& record)
      : hp_(hp),
        server_(ServerState::init(std::move(w0))),
        recorder_(problem, record, sim.horizon_T),
        record_(record) {
    record_.audit = StalenessAudit(sim.staleness_mode, sim.tau_max);
    recorder_.observe_model(server_.model, 0);
  }

  int64_t current_step() const override { return server_.server_step_t; }
  const ParamVector& model() const override { return server_.model; }

  void handle_upload(const ClientUpdate& update, int64_t uploads_so_far,
                     int64_t events_so_far) override {
    const auto flush = server_receive(server_, update, hp_);
    if (!flush) return;
    for (const Contributor& c : flush->contributors) {
      record_.audit.record(c.client_id, c.download_step, flush->step);
    }
    recorder_.on_flush(flush->step, server_.model, record_.audit, uploads_so_far,
                       events_so_far);
  }

  const ServerState& server() const { return server_; }

 private:
  const HyperParams& hp_;
  ServerState server_;
  MetricsRecorder recorder_;
  RunRecord& record_;
};

}  // namespace

EventLoopStats drive_event_loop(const Problem& problem, const HyperParams& hp,
                                const SimConfig& sim, UploadHandler& handler,
                                EventLogWriter* event_log) {
  const int n = problem.n();
  EventQueue queue;
  std::vector<int64_t> round_index(n, 0);

  // Delay substreams are keyed per (client, round, leg) so any scheduler
  // replays them identically.
  const auto sample_delay = [&](const DelaySpec& spec, StreamTag tag, int client,
                                int64_t round) {
    RngStream rng = derive_stream(sim.seed, tag,
                                  {static_cast<uint64_t>(client), static_cast<uint64_t>(round)});
    return spec.sample(client, rng);
  };

  for (int i = 0; i < n; ++i) {
    queue.push_download(sample_delay(sim.delay.download, StreamTag::kDelayDown, i, 0), i);
  }

  EventLoopStats stats;
  while (handler.current_step() < sim.horizon_T) {
    SimEvent ev = queue.pop_next();
    ++stats.events;
    if (ev.kind == EventKind::DownloadComplete) {
      const int i = ev.client_id;
      const int64_t step = handler.current_step();
      if (event_log) event_log->write(ev.fire_time, ev.sequence_no, "download", i, step);
      // Local compute is instantaneous in simulation time; only the two
      // communication legs consume time.
      ClientUpdate update =
          run_client_round(problem, i, handler.model(), step, hp, sim.seed, round_index[i]);
      const double up_delay =
          sample_delay(sim.delay.upload, StreamTag::kDelayUp, i, round_index[i]);
      ++round_index[i];
      queue.push_upload(ev.fire_time + up_delay, i, std::move(update));
    } else {
      const int i = ev.client_id;
      ++stats.uploads;
      if (event_log) {
        event_log->write(ev.fire_time, ev.sequence_no, "upload", i, handler.current_step());
      }
      handler.handle_upload(ev.update, stats.uploads, stats.events);
      // At-most-one outstanding round: the next download is requested only
      // once the upload has landed.
      const double down_delay =
          sample_delay(sim.delay.download, StreamTag::kDelayDown, i, round_index[i]);
      queue.push_download(ev.fire_time + down_delay, i);
    }
  }
  return stats;
}

namespace {

RunRecord run_uniform_arrival(const Problem& problem, const HyperParams& hp,
                              const SimConfig& sim,
                              std::span<const std::pair<int, int64_t>> forced,
                              const RunSinks& sinks, ParamVector w0) {
  const int n = problem.n();
  RunRecord record;
  record.algorithm = "fedbuff";
  record.run_seed = sim.seed;
  record.horizon = sim.horizon_T;
  record.audit = StalenessAudit(sim.staleness_mode, sim.tau_max);

  ServerState server = ServerState::init(std::move(w0));
  MetricsRecorder recorder(problem, record, sim.horizon_T);
  recorder.observe_model(server.model, 0);

  // Ring of the last tau_max+1 models; slot step % (tau_max+1) holds w^step.
  const auto window = static_cast<size_t>(sim.tau_max + 1);
  std::vector<ParamVector> ring(window);
  ring[0] = server.model;

  RngStream arrival_rng = derive_stream(sim.seed, StreamTag::kArrival);
  std::vector<int64_t> round_index(n, 0);
  int64_t slot = 0;

  while (server.server_step_t < sim.horizon_T) {
    const int64_t t = server.server_step_t;
    int client;
    int64_t want_staleness;
    if (!forced.empty()) {
      if (slot >= static_cast<int64_t>(forced.size())) {
        throw ConfigError("forced arrival sequence shorter than the run needs");
      }
      client = forced[static_cast<size_t>(slot)].first;
      want_staleness = forced[static_cast<size_t>(slot)].second;
    } else {
      client = sample_arrival_uniform(arrival_rng, n);
      want_staleness =
          static_cast<int64_t>(arrival_rng.uniform_u64(static_cast<uint64_t>(sim.tau_max + 1)));
    }
    const int64_t staleness = std::min(want_staleness, t);  // clamp to available history
    const int64_t snapshot_step = t - staleness;
    const ParamVector& snapshot = ring[static_cast<size_t>(snapshot_step) % window];

    ClientUpdate update = run_client_round(problem, client, snapshot, snapshot_step, hp,
                                           sim.seed, round_index[client]);
    ++round_index[client];
    ++slot;
    if (sinks.event_log) {
      sinks.event_log->write(static_cast<double>(t), static_cast<uint64_t>(slot - 1), "upload",
                             client, t);
    }

    const auto flush = server_receive(server, update, hp);
    if (flush) {
      for (const Contributor& c : flush->contributors) {
        record.audit.record(c.client_id, c.download_step, flush->step);
      }
      recorder.on_flush(flush->step, server.model, record.audit, slot, slot);
      ring[static_cast<size_t>(server.server_step_t) % window] = server.model;
    }
  }

  record.total_uploads = slot;
  record.total_events = slot;
  record.final_model = server.model;
  record.final_model_hash = hash_doubles(record.final_model);
  return record;
}

}  // namespace

ParamVector default_initial_model(const Problem& problem, double init_scale) {
  return ParamVector(static_cast<size_t>(problem.dim()), init_scale);
}

RunRecord run_simulation(const Problem& problem, const HyperParams& hp, const SimConfig& sim,
                         const RunSinks& sinks, ParamVector initial_model) {
  validate_hyper(hp, problem.n());
  sim.validate(problem.n(), hp.buffer_size_k);
  if (initial_model.empty()) initial_model = default_initial_model(problem);
  check_dim(initial_model, static_cast<size_t>(problem.dim()), "run_simulation");

  if (sim.mode == SimMode::UniformArrival) {
    return run_uniform_arrival(problem, hp, sim, {}, sinks, std::move(initial_model));
  }

  RunRecord record;
  record.algorithm = "fedbuff";
  record.run_seed = sim.seed;
  record.horizon = sim.horizon_T;
  FedBuffHandler handler(problem, hp, sim, std::move(initial_model), record);
  const EventLoopStats stats = drive_event_loop(problem, hp, sim, handler, sinks.event_log);
  record.total_uploads = stats.uploads;
  record.total_events = stats.events;
  record.final_model = handler.server().model;
  record.final_model_hash = hash_doubles(record.final_model);
  return record;
}

RunRecord run_simulation_forced_arrivals(const Problem& problem, const HyperParams& hp,
                                         const SimConfig& sim,
                                         std::span<const std::pair<int, int64_t>> arrivals,
                                         const RunSinks& sinks, ParamVector initial_model) {
  validate_hyper(hp, problem.n());
  if (sim.mode != SimMode::UniformArrival) {
    throw ConfigError("forced arrivals require UniformArrival mode");
  }
  if (initial_model.empty()) initial_model = default_initial_model(problem);
  return run_uniform_arrival(problem, hp, sim, arrivals, sinks, std::move(initial_model));
}

}  // namespace fedbuff
