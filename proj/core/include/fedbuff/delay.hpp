#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedbuff/rng.hpp"

namespace fedbuff {

// Communication delay for one leg (download or upload). Every kind has a
// finite cap, which is what makes a bounded-staleness analysis possible at
// all. Delays are in abstract time units and nonnegative.
struct DelaySpec {
  enum class Kind { Deterministic, UniformInt, Geometric };
  Kind kind = Kind::Deterministic;

  // Deterministic: constant per client; broadcast when a single value given.
  std::vector<double> constants = {0.0};
  // UniformInt: integer delay in [lo, hi].
  int64_t lo = 0, hi = 0;
  // Geometric: failures-before-success with success probability p, clamped to cap.
  double p = 0.5;
  int64_t cap = 0;

  void validate(int n, const std::string& field) const;  // throws ConfigError
  double sample(int client_id, RngStream& rng) const;
  double max_delay(int client_id) const;
  double min_delay(int client_id) const;

  static DelaySpec deterministic(std::vector<double> per_client) {
    DelaySpec s;
    s.kind = Kind::Deterministic;
    s.constants = std::move(per_client);
    return s;
  }
  static DelaySpec uniform_int(int64_t lo, int64_t hi) {
    DelaySpec s;
    s.kind = Kind::UniformInt;
    s.lo = lo;
    s.hi = hi;
    return s;
  }
  static DelaySpec geometric(double p, int64_t cap) {
    DelaySpec s;
    s.kind = Kind::Geometric;
    s.p = p;
    s.cap = cap;
    return s;
  }
};

struct DelayModel {
  DelaySpec download;
  DelaySpec upload;

  static DelayModel zero() { return {}; }

  void validate(int n) const;
  // Conservative upper bound on the staleness any upload can accrue under
  // these delays, or -1 when no finite bound is provable (e.g. a zero
  // round-trip client racing a slow one). Used for startup validation.
  int64_t staleness_upper_bound(int n, int64_t buffer_size_k) const;
};

}  // namespace fedbuff
