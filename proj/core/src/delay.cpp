#include "fedbuff/delay.hpp"

#include <algorithm>
#include <cmath>

#include "fedbuff/errors.hpp"

namespace fedbuff {

void DelaySpec::validate(int n, const std::string& field) const {
  switch (kind) {
    case Kind::Deterministic:
      if (constants.empty()) throw ConfigError(field + ".constants: must be non-empty");
      if (constants.size() != 1 && static_cast<int>(constants.size()) != n) {
        throw ConfigError(field + ".constants: need 1 or n entries");
      }
      for (double c : constants) {
        if (!(c >= 0.0) || !std::isfinite(c)) {
          throw ConfigError(field + ".constants: delays must be finite and >= 0");
        }
      }
      break;
    case Kind::UniformInt:
      if (lo < 0 || hi < lo) throw ConfigError(field + ": need 0 <= lo <= hi");
      break;
    case Kind::Geometric:
      if (!(p > 0.0) || p > 1.0) throw ConfigError(field + ".p: must be in (0, 1]");
      if (cap < 0) throw ConfigError(field + ".cap: must be >= 0");
      break;
  }
}

double DelaySpec::sample(int client_id, RngStream& rng) const {
  switch (kind) {
    case Kind::Deterministic:
      return constants.size() == 1 ? constants[0]
                                   : constants[static_cast<size_t>(client_id)];
    case Kind::UniformInt:
      return static_cast<double>(lo + static_cast<int64_t>(
                                          rng.uniform_u64(static_cast<uint64_t>(hi - lo + 1))));
    case Kind::Geometric:
      return static_cast<double>(rng.geometric(p, cap));
  }
  return 0.0;
}

double DelaySpec::max_delay(int client_id) const {
  switch (kind) {
    case Kind::Deterministic:
      return constants.size() == 1 ? constants[0]
                                   : constants[static_cast<size_t>(client_id)];
    case Kind::UniformInt:
      return static_cast<double>(hi);
    case Kind::Geometric:
      return static_cast<double>(cap);
  }
  return 0.0;
}

double DelaySpec::min_delay(int client_id) const {
  switch (kind) {
    case Kind::Deterministic:
      return constants.size() == 1 ? constants[0]
                                   : constants[static_cast<size_t>(client_id)];
    case Kind::UniformInt:
      return static_cast<double>(lo);
    case Kind::Geometric:
      return 0.0;
  }
  return 0.0;
}

void DelayModel::validate(int n) const {
  download.validate(n, "sim.delay.download");
  upload.validate(n, "sim.delay.upload");
}

int64_t DelayModel::staleness_upper_bound(int n, int64_t buffer_size_k) const {
  // Staleness of one upload = flushes between its snapshot and its apply.
  // Uploads that can feed those flushes: K-1 already buffered at snapshot
  // time, this one, at most K-1 after it, plus whatever the other clients
  // land inside the upload window W. Client j fits at most
  // floor(W / min_round_trip_j) + 1 uploads into any window of length W.
  double w_max = 0.0;
  for (int j = 0; j < n; ++j) {
    w_max = std::max(w_max, upload.max_delay(j));
  }

  bool all_instant = true;
  for (int j = 0; j < n; ++j) {
    if (download.min_delay(j) > 0.0 || upload.min_delay(j) > 0.0) all_instant = false;
  }
  if (all_instant) {
    // Zero delays degenerate to a lockstep round-robin: every client uploads
    // exactly once per wave, so at most ceil(n/K) - 1 flushes can intervene.
    return (static_cast<int64_t>(n) + buffer_size_k - 1) / buffer_size_k - 1;
  }

  double arrivals = 1.0;  // the upload under consideration
  for (int j = 0; j < n; ++j) {
    const double rt = download.min_delay(j) + upload.min_delay(j);
    if (rt <= 0.0) {
      return -1;  // a zero round-trip client can starve a slow one indefinitely
    }
    arrivals += std::floor(w_max / rt) + 1.0;
  }
  const double uploads = (2.0 * static_cast<double>(buffer_size_k) - 2.0) + arrivals;
  return static_cast<int64_t>(std::floor(uploads / static_cast<double>(buffer_size_k)));
}

}  // namespace fedbuff
