#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedbuff/baselines.hpp"
#include "fedbuff/core.hpp"
#include "fedbuff/objectives.hpp"
#include "fedbuff/simulator.hpp"

namespace fedbuff {

enum class Algorithm { FedBuff, PureAsync, FedAvgSync };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

// One declarative experiment: a problem, an algorithm, hyperparameters
// (either explicit or scheduled automatically from the problem constants),
// and the (seed x horizon) grid to run. Serialized as JSON; the canonical
// serialization (sorted keys) is what fingerprints hash.
struct ExperimentConfig {
  std::string name = "experiment";
  Algorithm algorithm = Algorithm::FedBuff;
  ProblemSpec problem;
  HyperParams hyper;
  bool auto_eta = false;   // eta = 1/(Q sqrt(LT)), resolved per cell
  bool auto_beta = false;  // beta = 1/K
  SimConfig sim;           // horizon_T and seed are filled per cell
  SyncRoundConfig fedavg;  // used when algorithm == FedAvgSync
  std::vector<uint64_t> seeds;
  std::vector<int64_t> horizons;
  double init_scale = 1.0;  // initial model = init_scale * ones(d)
  bool emit_event_log = false;
  std::string output_dir;  // subdirectory under the output root; defaults to name
};

ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path,
                                  const std::vector<std::string>& overrides = {});

// Canonical JSON (sorted keys, resolved defaults); re-parsing it yields an
// identical fingerprint.
std::string canonical_config_json(const ExperimentConfig& cfg);
std::string experiment_fingerprint(const ExperimentConfig& cfg);

// Full up-front validation of every module-level invariant. Throws
// ConfigError naming the first violated field; returns warnings.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

// One (seed, horizon) cell with auto stepsizes resolved against the problem
// constants. The fingerprint hashes the cell's canonical config with the
// resolved values embedded, so schedule drift changes the fingerprint.
struct CellPlan {
  uint64_t seed = 0;
  int64_t horizon = 0;
  double eta = 0.0;
  double beta = 0.0;
  std::string fingerprint;
  std::string canonical_json;
};

std::vector<CellPlan> plan_cells(const ExperimentConfig& cfg, const ProblemConstants& constants);

}  // namespace fedbuff
