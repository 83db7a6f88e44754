#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace modreach {

// xoshiro256++ seeded through splitmix64. Everything randomized in this
// project flows through this generator so that runs are reproducible from a
// single seed and the full state (4 words) can be checkpointed.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  // Independent stream derived from (seed, index), e.g. one per evaluation
  // episode. Aggregating in index order keeps results worker-count invariant.
  static Rng stream(uint64_t seed, uint64_t index) {
    Rng r;
    uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    for (auto& w : r.s_) w = splitmix64(x);
    return r;
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53 random bits.
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // Uniform integer in [0, n), n >= 1. Multiply-shift, no modulo bias worth
  // speaking of at 64 bits.
  int uniform_int(int n) {
    return int((static_cast<__uint128_t>(next()) * uint64_t(n)) >> 64);
  }

  // Standard normal via Box-Muller. Draws two words per call; no cached
  // second sample, so the state alone determines the sequence.
  double gaussian() {
    const double u1 = double((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = double(next() >> 11) * 0x1.0p-53;        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::array<uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::array<uint64_t, 4> s_{};
};

}  // namespace modreach
