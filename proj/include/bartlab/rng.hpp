#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bartlab/common.hpp"

namespace bartlab {

// xoshiro256++ with splitmix64 seeding. Distributions are implemented here
// rather than taken from <random> because libstdc++ leaves normal_distribution
// and friends implementation-defined; fixed algorithms keep traces bit-stable.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
    have_spare_ = false;
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

  // Uniform on [0,1) with 53 random bits.
  double unif() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform on {0,...,n-1}, rejection-free of modulo bias.
  int64_t unif_int(int64_t n) {
    const uint64_t bound = static_cast<uint64_t>(n);
    uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    uint64_t l = static_cast<uint64_t>(m);
    if (l < bound) {
      const uint64_t t = (0 - bound) % bound;
      while (l < t) {
        x = next();
        m = static_cast<__uint128_t>(x) * bound;
        l = static_cast<uint64_t>(m);
      }
    }
    return static_cast<int64_t>(m >> 64);
  }

  // Standard normal via Box-Muller (no rejection, so the draw sequence is a
  // fixed function of the engine stream).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = unif();
    while (u1 <= 0.0) u1 = unif();
    const double u2 = unif();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925287 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 boosted through the
  // U^{1/shape} trick.
  double gamma(double shape) {
    if (shape <= 0.0) throw NumericalError("gamma: shape must be positive");
    if (shape < 1.0) {
      double u = unif();
      while (u <= 0.0) u = unif();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = unif();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

  double chi2(double dof) { return 2.0 * gamma(0.5 * dof); }

  std::vector<double> dirichlet(const std::vector<double>& alpha) {
    std::vector<double> g(alpha.size());
    double sum = 0.0;
    for (size_t i = 0; i < alpha.size(); ++i) {
      g[i] = gamma(alpha[i]);
      sum += g[i];
    }
    if (sum <= 0.0) throw NumericalError("dirichlet: degenerate draw");
    for (auto& v : g) v /= sum;
    return g;
  }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Derive a child stream seed; used to give chains/replicates independent
  // streams from one base seed.
  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2));
    uint64_t z = splitmix64(x);
    return z ^ splitmix64(x);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_;
};

// Counter-based standard normal keyed by (stream, counter): used where a draw
// must be reproducible independent of evaluation order (e.g. predictive noise
// at coverage time, keyed by chain/iteration/point).
inline double keyed_normal(uint64_t stream, uint64_t counter) {
  uint64_t x = Rng::mix(stream, counter);
  const uint64_t a = Rng::splitmix64(x);
  const uint64_t b = Rng::splitmix64(x);
  double u1 = static_cast<double>(a >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925287 * u2);
}

}  // namespace bartlab
