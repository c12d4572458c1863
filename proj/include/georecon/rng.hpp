#pragma once

#include <cmath>
#include <cstdint>

#include "georecon/types.hpp"

namespace georecon {

/// SplitMix64; used to expand one master seed into independent substream seeds.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

/// Derive the seed of substream `index` from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  SplitMix64 s(master ^ (0x6a09e667f3bcc909ULL + index * 0x3c6ef372fe94f82bULL));
  return s.next();
}

/// xoshiro256++ with Box-Muller gaussians. Deterministic across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
    has_spare_ = false;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0,1) with 53 random bits.
  Real uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  std::int64_t uniform_int(std::int64_t n) {
    // n expected small; modulo bias is negligible against 2^64
    return static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(n));
  }

  /// Standard normal via Box-Muller.
  Real gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    Real u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const Real u2 = uniform();
    const Real r = std::sqrt(-2.0 * std::log(u1));
    const Real theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Real gaussian(Real mean, Real stddev) { return mean + stddev * gaussian(); }

  Vec gaussian_vec(Index n, Real stddev = 1.0) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = stddev * gaussian();
    return v;
  }

  Mat gaussian_mat(Index rows, Index cols, Real stddev = 1.0) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = stddev * gaussian();
    return m;
  }

  /// Fisher-Yates shuffle of indices 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<std::int64_t>(i)));
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  Real spare_ = 0.0;
  bool has_spare_;
};

}  // namespace georecon
