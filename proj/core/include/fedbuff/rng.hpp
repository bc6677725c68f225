#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace fedbuff {

// All randomness in the project flows through RngStream so that runs are
// bitwise reproducible regardless of platform or standard library. The
// generator is xoshiro256++ seeded via splitmix64; distributions are
// implemented here instead of <random> because libstdc++/libc++ do not
// guarantee identical distribution output for the same engine state.

inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// One-shot 64-bit mixer (splitmix64 finalizer).
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class RngStream {
 public:
  explicit RngStream(uint64_t seed) {
    uint64_t s = seed;
    for (auto& word : state_) word = splitmix64_next(s);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n). Rejection sampling removes modulo bias.
  uint64_t uniform_u64(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller (no cached second value).
  double normal() {
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Failures-before-success geometric, clamped to [0, cap]. p in (0, 1].
  int64_t geometric(double p, int64_t cap) {
    if (p >= 1.0) return 0;
    const double u = next_double();
    const double x = std::floor(std::log1p(-u) / std::log1p(-p));
    const auto k = static_cast<int64_t>(x);
    return k < 0 ? 0 : (k > cap ? cap : k);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> state_;
};

// Purpose tags keeping derived substreams disjoint. Values are part of the
// reproducibility contract: changing them changes every trajectory.
enum class StreamTag : uint64_t {
  kDataset = 0x01,   // dataset generation, keyed by (problem seed, client)
  kBatch = 0x02,     // batch sampling, keyed by (run seed, client, round)
  kDelayDown = 0x03, // download delay, keyed by (run seed, client, round)
  kDelayUp = 0x04,   // upload delay, keyed by (run seed, client, round)
  kArrival = 0x05,   // uniform-arrival slot draws, keyed by run seed
  kProbe = 0x06,     // probe-point generation
  kSample = 0x07,    // fedavg round sampling, keyed by (run seed, round)
};

inline uint64_t derive_key(uint64_t root, std::initializer_list<uint64_t> parts) {
  uint64_t h = mix64(root);
  for (uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

inline RngStream derive_stream(uint64_t root, StreamTag tag,
                               std::initializer_list<uint64_t> parts = {}) {
  uint64_t h = derive_key(root, {static_cast<uint64_t>(tag)});
  for (uint64_t p : parts) h = mix64(h ^ mix64(p));
  return RngStream(h);
}

}  // namespace fedbuff
