#pragma once

// Deterministic random streams. One algorithm for the whole project:
// xoshiro256++ seeded through splitmix64. Same seed gives the same byte
// stream within one build; cross-platform bit equality is not promised.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "fuselstm/matrix.hpp"

namespace fuselstm {

namespace detail {

inline std::uint64_t splitmix64_fin(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  return splitmix64_fin(state);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

// Child-seed derivation: injective in `tag` for a fixed parent seed, so
// distinct tags can never collide. Chain calls for multi-part tags.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return detail::splitmix64_fin(seed + 0x9E3779B97F4A7C15ULL * (tag + 1));
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = detail::splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  // uniform in [0, 1), 53 mantissa bits
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Standard-normal pair via Box-Muller; both outputs are always produced,
  // so a call consumes exactly two uniforms.
  std::pair<double, double> next_gaussian_pair() {
    const double u1 = 1.0 - next_unit();  // (0, 1], keeps log finite
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

 private:
  std::array<std::uint64_t, 4> state_;
};

// n standard-normal draws; odd n still consumes a full Box-Muller pair at
// the tail so the uniform count is always 2*ceil(n/2).
inline Vector sample_gaussian(RngStream& stream, int n) {
  if (n < 1) throw std::invalid_argument("sample_gaussian: n must be >= 1");
  Vector out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; i += 2) {
    const auto [g0, g1] = stream.next_gaussian_pair();
    out[i] = g0;
    if (i + 1 < n) out[i + 1] = g1;
  }
  return out;
}

// Entries uniform in [-L, L), L = sqrt(6 / (rows + cols)), drawn row-major.
inline Matrix glorot_uniform(RngStream& stream, int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("glorot_uniform: dims must be >= 1");
  const double limit = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (auto& v : m.data) v = stream.next_uniform(-limit, limit);
  return m;
}

}  // namespace fuselstm
