#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fedbuff/vec_ops.hpp"

namespace fedbuff {

// One row per server step t. grad_norm_sq and f_value are evaluated at the
// pre-flush model w^t; the counters are taken at the flush that consumed
// step t (so they include that flush's own uploads).
struct MetricRow {
  int64_t t = 0;
  double grad_norm_sq = 0.0;
  double f_value = 0.0;
  int64_t max_staleness_so_far = 0;
  int64_t uploads_so_far = 0;
  int64_t wall_events = 0;
};

enum class StalenessMode { Enforce, Observe };

struct StalenessRecord {
  int client_id = 0;
  int64_t download_step = 0;
  int64_t apply_step = 0;
  int64_t staleness = 0;  // apply_step - download_step, always >= 0
};

// Per-upload staleness bookkeeping. In Enforce mode a record exceeding
// tau_max aborts the run naming the offending client and steps; Observe mode
// only counts violations (for studying what happens when the bounded-delay
// assumption fails).
class StalenessAudit {
 public:
  StalenessAudit() = default;
  StalenessAudit(StalenessMode mode, int64_t tau_max) : mode_(mode), tau_max_(tau_max) {}

  void record(int client_id, int64_t download_step, int64_t apply_step) {
    const int64_t staleness = apply_step - download_step;
    records_.push_back({client_id, download_step, apply_step, staleness});
    max_staleness_ = std::max(max_staleness_, staleness);
    if (staleness > tau_max_) {
      ++violations_;
      if (mode_ == StalenessMode::Enforce) {
        throw RunAbort("staleness violation: client " + std::to_string(client_id) +
                       " downloaded at step " + std::to_string(download_step) +
                       ", applied at step " + std::to_string(apply_step) + " (staleness " +
                       std::to_string(staleness) + " > tau_max " + std::to_string(tau_max_) +
                       ")");
      }
    }
  }

  int64_t max_staleness() const { return max_staleness_; }
  int64_t violations() const { return violations_; }
  int64_t tau_max() const { return tau_max_; }
  StalenessMode mode() const { return mode_; }
  const std::vector<StalenessRecord>& records() const { return records_; }

 private:
  StalenessMode mode_ = StalenessMode::Enforce;
  int64_t tau_max_ = 0;
  int64_t max_staleness_ = 0;
  int64_t violations_ = 0;
  std::vector<StalenessRecord> records_;
};

struct RunRecord {
  std::string algorithm;  // "fedbuff" | "pure_async" | "fedavg_sync"
  uint64_t run_seed = 0;
  int64_t horizon = 0;
  std::string config_fingerprint;

  std::vector<MetricRow> rows;  // rows.size() == horizon on success
  // Hash of the model after each flush (w^1 .. w^T); used for bitwise
  // trajectory comparison without storing T full vectors.
  std::vector<uint64_t> model_hash_per_step;
  ParamVector final_model;
  uint64_t final_model_hash = 0;

  StalenessAudit audit;
  int64_t total_uploads = 0;
  int64_t total_events = 0;
};

}  // namespace fedbuff
