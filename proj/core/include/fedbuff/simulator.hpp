#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedbuff/core.hpp"
#include "fedbuff/delay.hpp"
#include "fedbuff/event_queue.hpp"
#include "fedbuff/io.hpp"
#include "fedbuff/objectives.hpp"
#include "fedbuff/run_record.hpp"

namespace fedbuff {

// Two ways to realize asynchrony:
//  - EventDriven: download/upload delays drive a discrete-event loop. Which
//    client lands in which buffer slot emerges from timing, which skews
//    toward fast clients rather than the uniform arrivals the convergence
//    analysis assumes. Good for robustness experiments.
//  - UniformArrival: each buffer slot draws its contributor uniformly from
//    [n] and a snapshot staleness uniformly from [0, tau_max] (clamped to
//    available history), matching the analysis assumptions verbatim. A ring
//    of the last tau_max+1 models provides the stale snapshots.
enum class SimMode { EventDriven, UniformArrival };

std::string sim_mode_name(SimMode m);
SimMode sim_mode_from_name(const std::string& name);
std::string staleness_mode_name(StalenessMode m);
StalenessMode staleness_mode_from_name(const std::string& name);

struct SimConfig {
  SimMode mode = SimMode::UniformArrival;
  int64_t tau_max = 0;
  DelayModel delay;  // EventDriven only
  int64_t horizon_T = 1;
  uint64_t seed = 0;  // run seed: batches, delays, arrival draws
  StalenessMode staleness_mode = StalenessMode::Enforce;

  // Throws ConfigError on malformed fields; returns warnings (e.g. the
  // conservative delay-cap analysis cannot certify staleness <= tau_max).
  std::vector<std::string> validate(int n, int64_t buffer_size_k) const;
};

struct RunSinks {
  EventLogWriter* event_log = nullptr;
};

// Draws i_{t,k} uniformly from [0, n).
int sample_arrival_uniform(RngStream& rng, int n);

// One full client round: download snapshot -> Q local steps -> update.
// Batch randomness is keyed by (run_seed, client, round_index) so different
// schedulers replay identical randomness for trace-equivalence tests.
ClientUpdate run_client_round(const Problem& problem, int client,
                              const ParamVector& snapshot, int64_t snapshot_step,
                              const HyperParams& hp, uint64_t run_seed, int64_t round_index);

// Server-side policy driven by the event loop; lets the buffered server and
// the unbuffered pure-async reference share identical event semantics while
// keeping their update arithmetic separate.
class UploadHandler {
 public:
  virtual ~UploadHandler() = default;
  virtual int64_t current_step() const = 0;
  virtual const ParamVector& model() const = 0;
  virtual void handle_upload(const ClientUpdate& update, int64_t uploads_so_far,
                             int64_t events_so_far) = 0;
};

struct EventLoopStats {
  int64_t uploads = 0;
  int64_t events = 0;
};

// Runs the download/compute/upload cycle for every client until the handler
// reaches horizon_T server steps. Used by both FedBuff and the pure-async
// baseline.
EventLoopStats drive_event_loop(const Problem& problem, const HyperParams& hp,
                                const SimConfig& sim, UploadHandler& handler,
                                EventLogWriter* event_log);

// Empty initial_model selects the default start, the all-ones vector.
RunRecord run_simulation(const Problem& problem, const HyperParams& hp, const SimConfig& sim,
                         const RunSinks& sinks = {}, ParamVector initial_model = {});

// Test hook: UniformArrival with an injected (client, staleness) sequence in
// place of the random draws.
RunRecord run_simulation_forced_arrivals(const Problem& problem, const HyperParams& hp,
                                         const SimConfig& sim,
                                         std::span<const std::pair<int, int64_t>> arrivals,
                                         const RunSinks& sinks = {},
                                         ParamVector initial_model = {});

// Shared default across simulator and baselines.
ParamVector default_initial_model(const Problem& problem, double init_scale = 1.0);

}  // namespace fedbuff
