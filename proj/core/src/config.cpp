#include "fedbuff/config.hpp"

#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "fedbuff/analysis.hpp"
#include "fedbuff/errors.hpp"
#include "fedbuff/io.hpp"

namespace fedbuff {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad type for '") + key + "'");
  }
}

DelaySpec delay_spec_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  check_keys(j, {"kind", "constants", "lo", "hi", "p", "cap"}, where);
  const auto kind = get_or<std::string>(j, "kind", "deterministic");
  if (kind == "deterministic") {
    auto constants = get_or<std::vector<double>>(j, "constants", {0.0});
    return DelaySpec::deterministic(std::move(constants));
  }
  if (kind == "uniform_int") {
    return DelaySpec::uniform_int(get_or<int64_t>(j, "lo", 0), get_or<int64_t>(j, "hi", 0));
  }
  if (kind == "geometric") {
    return DelaySpec::geometric(get_or<double>(j, "p", 0.5), get_or<int64_t>(j, "cap", 0));
  }
  throw ConfigError(where + ".kind: unknown kind '" + kind + "'");
}

json delay_spec_to_json(const DelaySpec& s) {
  json j;
  switch (s.kind) {
    case DelaySpec::Kind::Deterministic:
      j["kind"] = "deterministic";
      j["constants"] = s.constants;
      break;
    case DelaySpec::Kind::UniformInt:
      j["kind"] = "uniform_int";
      j["lo"] = s.lo;
      j["hi"] = s.hi;
      break;
    case DelaySpec::Kind::Geometric:
      j["kind"] = "geometric";
      j["p"] = s.p;
      j["cap"] = s.cap;
      break;
  }
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(j,
             {"name", "algorithm", "problem", "hyper", "sim", "fedavg", "seeds", "horizons",
              "init_scale", "emit_event_log", "output_dir"},
             "config");

  ExperimentConfig cfg;
  cfg.name = get_or<std::string>(j, "name", "experiment");
  cfg.algorithm = algorithm_from_name(get_or<std::string>(j, "algorithm", "fedbuff"));

  if (!j.contains("problem")) throw ConfigError("config: missing 'problem'");
  {
    const json& p = j.at("problem");
    check_keys(p,
               {"family", "n", "d", "heterogeneity_shift", "regularizer_weight", "scale",
                "seed", "points_per_client", "dispersion"},
               "problem");
    cfg.problem.family = family_from_name(get_or<std::string>(p, "family", "quadratic_mixture"));
    cfg.problem.n = get_or<int>(p, "n", 1);
    cfg.problem.d = get_or<int>(p, "d", 1);
    cfg.problem.heterogeneity_shift = get_or<double>(p, "heterogeneity_shift", 1.0);
    cfg.problem.regularizer_weight = get_or<double>(p, "regularizer_weight", 0.0);
    cfg.problem.scale = get_or<double>(p, "scale", 1.0);
    cfg.problem.seed = get_or<uint64_t>(p, "seed", 0);
    cfg.problem.points_per_client = get_or<int>(p, "points_per_client", 8);
    cfg.problem.dispersion = get_or<double>(p, "dispersion", 1.0);
  }

  {
    const json h = j.contains("hyper") ? j.at("hyper") : json::object();
    check_keys(h, {"Q", "K", "batch_size", "full_batch", "eta", "beta"}, "hyper");
    cfg.hyper.local_steps_q = get_or<int64_t>(h, "Q", 1);
    cfg.hyper.buffer_size_k = get_or<int64_t>(h, "K", 1);
    cfg.hyper.batch_size = get_or<int64_t>(h, "batch_size", 1);
    cfg.hyper.full_batch = get_or<bool>(h, "full_batch", false);
    if (h.contains("eta") && h.at("eta").is_string()) {
      if (h.at("eta").get<std::string>() != "auto") {
        throw ConfigError("hyper.eta: must be a number or \"auto\"");
      }
      cfg.auto_eta = true;
      cfg.hyper.eta = 1.0;  // placeholder until per-cell resolution
    } else {
      cfg.hyper.eta = get_or<double>(h, "eta", 0.1);
    }
    if (h.contains("beta") && h.at("beta").is_string()) {
      if (h.at("beta").get<std::string>() != "auto") {
        throw ConfigError("hyper.beta: must be a number or \"auto\"");
      }
      cfg.auto_beta = true;
      cfg.hyper.beta = 1.0;
    } else {
      cfg.hyper.beta = get_or<double>(h, "beta", 1.0);
    }
  }

  {
    const json s = j.contains("sim") ? j.at("sim") : json::object();
    check_keys(s, {"mode", "tau_max", "staleness_mode", "delay"}, "sim");
    cfg.sim.mode = sim_mode_from_name(get_or<std::string>(s, "mode", "uniform_arrival"));
    cfg.sim.tau_max = get_or<int64_t>(s, "tau_max", 0);
    cfg.sim.staleness_mode =
        staleness_mode_from_name(get_or<std::string>(s, "staleness_mode", "enforce"));
    if (s.contains("delay")) {
      const json& d = s.at("delay");
      check_keys(d, {"download", "upload"}, "sim.delay");
      if (d.contains("download")) {
        cfg.sim.delay.download = delay_spec_from_json(d.at("download"), "sim.delay.download");
      }
      if (d.contains("upload")) {
        cfg.sim.delay.upload = delay_spec_from_json(d.at("upload"), "sim.delay.upload");
      }
    }
  }

  {
    const json f = j.contains("fedavg") ? j.at("fedavg") : json::object();
    check_keys(f, {"clients_per_round", "aggregation_weight"}, "fedavg");
    cfg.fedavg.clients_per_round = get_or<int>(f, "clients_per_round", cfg.problem.n);
    cfg.fedavg.aggregation_weight = get_or<double>(f, "aggregation_weight", 1.0);
  }

  cfg.seeds = get_or<std::vector<uint64_t>>(j, "seeds", {});
  cfg.horizons = get_or<std::vector<int64_t>>(j, "horizons", {});
  cfg.init_scale = get_or<double>(j, "init_scale", 1.0);
  cfg.emit_event_log = get_or<bool>(j, "emit_event_log", false);
  cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.name);
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["algorithm"] = algorithm_name(cfg.algorithm);
  j["problem"] = {{"family", family_name(cfg.problem.family)},
                  {"n", cfg.problem.n},
                  {"d", cfg.problem.d},
                  {"heterogeneity_shift", cfg.problem.heterogeneity_shift},
                  {"regularizer_weight", cfg.problem.regularizer_weight},
                  {"scale", cfg.problem.scale},
                  {"seed", cfg.problem.seed},
                  {"points_per_client", cfg.problem.points_per_client},
                  {"dispersion", cfg.problem.dispersion}};
  json h;
  h["Q"] = cfg.hyper.local_steps_q;
  h["K"] = cfg.hyper.buffer_size_k;
  h["batch_size"] = cfg.hyper.batch_size;
  h["full_batch"] = cfg.hyper.full_batch;
  if (cfg.auto_eta) {
    h["eta"] = "auto";
  } else {
    h["eta"] = cfg.hyper.eta;
  }
  if (cfg.auto_beta) {
    h["beta"] = "auto";
  } else {
    h["beta"] = cfg.hyper.beta;
  }
  j["hyper"] = h;
  j["sim"] = {{"mode", sim_mode_name(cfg.sim.mode)},
              {"tau_max", cfg.sim.tau_max},
              {"staleness_mode", staleness_mode_name(cfg.sim.staleness_mode)},
              {"delay",
               {{"download", delay_spec_to_json(cfg.sim.delay.download)},
                {"upload", delay_spec_to_json(cfg.sim.delay.upload)}}}};
  j["fedavg"] = {{"clients_per_round", cfg.fedavg.clients_per_round},
                 {"aggregation_weight", cfg.fedavg.aggregation_weight}};
  j["seeds"] = cfg.seeds;
  j["horizons"] = cfg.horizons;
  j["init_scale"] = cfg.init_scale;
  j["emit_event_log"] = cfg.emit_event_log;
  j["output_dir"] = cfg.output_dir;
  return j;
}

void apply_override(json& j, const std::string& key_eq_value) {
  const auto eq = key_eq_value.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override: expected KEY=VALUE, got '" + key_eq_value + "'");
  }
  const std::string path = key_eq_value.substr(0, eq);
  const std::string value = key_eq_value.substr(eq + 1);

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // fall back to a plain string
  }

  json* node = &j;
  size_t start = 0;
  for (;;) {
    const size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("override: empty path segment in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::FedBuff: return "fedbuff";
    case Algorithm::PureAsync: return "pure_async";
    case Algorithm::FedAvgSync: return "fedavg_sync";
  }
  return "unknown";
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "fedbuff") return Algorithm::FedBuff;
  if (name == "pure_async") return Algorithm::PureAsync;
  if (name == "fedavg_sync") return Algorithm::FedAvgSync;
  throw ConfigError("algorithm: unknown algorithm '" + name + "'");
}

ExperimentConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig load_config_file(const std::string& path,
                                  const std::vector<std::string>& overrides) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config: JSON parse error in " + path + ": " + e.what());
  }
  for (const auto& ov : overrides) apply_override(j, ov);
  return config_from_json(j);
}

std::string canonical_config_json(const ExperimentConfig& cfg) {
  // nlohmann::json objects keep keys sorted, so dump() is canonical.
  return config_to_json(cfg).dump();
}

std::string experiment_fingerprint(const ExperimentConfig& cfg) {
  return hex64(fnv1a64(canonical_config_json(cfg)));
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> warnings;

  // ProblemSpec invariants (family parameters, n, d, scale, ...).
  if (cfg.problem.n < 1) throw ConfigError("problem.n: must be >= 1");
  if (cfg.problem.d < 1) throw ConfigError("problem.d: must be >= 1");
  if (!(cfg.problem.scale > 0.0)) throw ConfigError("problem.scale: must be > 0");
  if (cfg.problem.heterogeneity_shift < 0.0) {
    throw ConfigError("problem.heterogeneity_shift: must be >= 0");
  }
  if (cfg.problem.regularizer_weight < 0.0) {
    throw ConfigError("problem.regularizer_weight: must be >= 0");
  }
  if (cfg.problem.dispersion < 0.0) throw ConfigError("problem.dispersion: must be >= 0");
  if (cfg.problem.points_per_client < 1) {
    throw ConfigError("problem.points_per_client: must be >= 1");
  }

  // HyperParams invariants; auto entries are resolved per cell and checked
  // again there.
  if (cfg.hyper.local_steps_q < 1) throw ConfigError("hyper.Q: must be >= 1");
  if (cfg.hyper.buffer_size_k < 1) throw ConfigError("hyper.K: must be >= 1");
  if (!cfg.hyper.full_batch && cfg.hyper.batch_size < 1) {
    throw ConfigError("hyper.batch_size: must be >= 1");
  }
  if (!cfg.auto_eta && !(cfg.hyper.eta > 0.0)) throw ConfigError("hyper.eta: must be > 0");
  if (!cfg.auto_beta && !(cfg.hyper.beta > 0.0)) throw ConfigError("hyper.beta: must be > 0");
  if (cfg.hyper.buffer_size_k > cfg.problem.n) {
    warnings.push_back("hyper.K exceeds problem.n; flushes will need repeat contributions");
  }

  if (cfg.seeds.empty()) throw ConfigError("seeds: must be non-empty");
  {
    std::unordered_set<uint64_t> distinct(cfg.seeds.begin(), cfg.seeds.end());
    if (distinct.size() != cfg.seeds.size()) throw ConfigError("seeds: must be distinct");
  }
  if (cfg.horizons.empty()) throw ConfigError("horizons: must be non-empty");
  for (int64_t h : cfg.horizons) {
    if (h < 1) throw ConfigError("horizons: every horizon must be >= 1");
  }
  if (!(cfg.init_scale == cfg.init_scale)) throw ConfigError("init_scale: must be a number");

  if (cfg.algorithm == Algorithm::PureAsync && cfg.sim.mode != SimMode::EventDriven) {
    throw ConfigError("algorithm pure_async requires sim.mode event_driven");
  }
  if (cfg.algorithm == Algorithm::FedAvgSync) {
    if (cfg.fedavg.clients_per_round < 1 || cfg.fedavg.clients_per_round > cfg.problem.n) {
      throw ConfigError("fedavg.clients_per_round: must be in [1, n]");
    }
    if (!(cfg.fedavg.aggregation_weight > 0.0)) {
      throw ConfigError("fedavg.aggregation_weight: must be > 0");
    }
  } else {
    // SimConfig invariants need a horizon; validate against each.
    for (int64_t h : cfg.horizons) {
      SimConfig sim = cfg.sim;
      sim.horizon_T = h;
      auto w = sim.validate(cfg.problem.n, cfg.hyper.buffer_size_k);
      warnings.insert(warnings.end(), w.begin(), w.end());
      break;  // delay analysis is horizon-independent; one pass suffices
    }
  }
  return warnings;
}

std::vector<CellPlan> plan_cells(const ExperimentConfig& cfg,
                                 const ProblemConstants& constants) {
  std::vector<CellPlan> cells;
  const json base = config_to_json(cfg);
  for (int64_t horizon : cfg.horizons) {
    for (uint64_t seed : cfg.seeds) {
      CellPlan cell;
      cell.seed = seed;
      cell.horizon = horizon;
      if (cfg.auto_eta || cfg.auto_beta) {
        const Schedule s = auto_schedule(constants.L, cfg.hyper.local_steps_q,
                                         cfg.hyper.buffer_size_k, horizon);
        cell.eta = cfg.auto_eta ? s.eta : cfg.hyper.eta;
        cell.beta = cfg.auto_beta ? s.beta : cfg.hyper.beta;
      } else {
        cell.eta = cfg.hyper.eta;
        cell.beta = cfg.hyper.beta;
      }
      json j = base;
      j["seeds"] = json::array({seed});
      j["horizons"] = json::array({horizon});
      j["hyper"]["eta"] = cell.eta;
      j["hyper"]["beta"] = cell.beta;
      cell.canonical_json = j.dump();
      cell.fingerprint = hex64(fnv1a64(cell.canonical_json));
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace fedbuff
