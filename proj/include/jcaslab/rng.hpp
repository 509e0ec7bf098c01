// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace jcaslab {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Deterministic random stream addressed by (master seed, purpose label,
// stream index). Streams with distinct addresses are independent for all
// practical purposes, and results never depend on the order in which
// streams are consumed - the basis of reproducible parallel Monte Carlo.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view purpose, std::uint64_t index) {
    std::uint64_t s = master_seed ^ detail::fnv1a(purpose);
    s ^= 0x632be59bd9b4e019ULL + (index << 1);
    std::uint64_t seq[4];
    std::uint64_t st = s + index * 0x9e3779b97f4a7c15ULL;
    for (auto& w : seq) w = detail::splitmix64(st);
    std::seed_seq sseq{static_cast<std::uint32_t>(seq[0]), static_cast<std::uint32_t>(seq[0] >> 32),
                       static_cast<std::uint32_t>(seq[1]), static_cast<std::uint32_t>(seq[1] >> 32),
                       static_cast<std::uint32_t>(seq[2]), static_cast<std::uint32_t>(seq[2] >> 32),
                       static_cast<std::uint32_t>(seq[3]), static_cast<std::uint32_t>(seq[3] >> 32)};
    engine_.seed(sseq);
  }

  // uniform in [0, 1)
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller (pair cached)
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // circularly symmetric complex normal with E|z|^2 = var
  std::complex<double> cgaussian(double var) {
    const double s = std::sqrt(0.5 * var);
    return {s * gaussian(), s * gaussian()};
  }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // rejection-free for our purposes; bias < 2^-53 is irrelevant here
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace jcaslab
