// Deterministic random streams. Everything stochastic in the toolkit draws
// from Rng so that runs are reproducible byte-for-byte on a given machine;
// std::random distributions are avoided because their output is
// implementation-defined.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace fsr {

namespace detail {
inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

// xoshiro256** with splitmix64 seeding.
class Rng {
 public:
  using State = std::array<uint64_t, 4>;

  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = detail::splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53-bit resolution.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }
  float next_float() { return float(next_double()); }

  // Uniform integer in [0, bound). Rejection keeps it unbiased.
  uint64_t below(uint64_t bound) {
    if (bound <= 1) return 0;
    const uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller (cosine branch only).
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Normal(0, sigma) truncated to +/- 2 sigma, the usual ViT weight init.
  double trunc_normal(double sigma) {
    for (;;) {
      double z = normal();
      if (std::fabs(z) <= 2.0) return z * sigma;
    }
  }

  // Fisher-Yates permutation of [0, n).
  std::vector<uint32_t> permutation(uint32_t n) {
    std::vector<uint32_t> p(n);
    for (uint32_t i = 0; i < n; ++i) p[i] = i;
    for (uint32_t i = n; i > 1; --i) {
      uint32_t j = uint32_t(below(i));
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

  // Independent child stream; used to split e.g. data-order and shuffle RNGs.
  Rng fork(uint64_t stream_id) const {
    uint64_t x = s_[0] ^ rotl(s_[3], 13) ^ (stream_id * 0x9e3779b97f4a7c15ull);
    return Rng(detail::splitmix64(x));
  }

  State state() const { return s_; }
  void set_state(const State& st) { s_ = st; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  State s_{};
};

}  // namespace fsr
