#pragma once

#include <cstdint>

#include "fedbuff/core.hpp"
#include "fedbuff/objectives.hpp"
#include "fedbuff/run_record.hpp"
#include "fedbuff/simulator.hpp"

namespace fedbuff {

// Reference schedulers used as oracles for the buffered-aggregation runs:
// the buffered algorithm must degenerate to these bitwise (K=1 -> pure
// async; K=n, zero delay, beta=1/n -> synchronous FedAvg).

struct SyncRoundConfig {
  int clients_per_round = 1;
  double aggregation_weight = 1.0;  // server stepsize applied to the summed deltas
};

// Synchronous FedAvg-style rounds: sample clients_per_round clients without
// replacement, run Q local steps each from the same snapshot, apply
// w -= aggregation_weight * sum(deltas), barrier. One metric row per round;
// staleness is identically zero.
RunRecord run_fedavg_sync(const Problem& problem, const HyperParams& hp,
                          const SyncRoundConfig& cfg, int64_t rounds, uint64_t seed,
                          ParamVector initial_model = {});

// Unbuffered asynchronous reference: identical event semantics to the
// simulator, but the server applies w -= beta * delta immediately on every
// upload. SimConfig.horizon_T counts server updates (= uploads here).
RunRecord run_pure_async(const Problem& problem, const HyperParams& hp, const SimConfig& sim,
                         const RunSinks& sinks = {}, ParamVector initial_model = {});

}  // namespace fedbuff
