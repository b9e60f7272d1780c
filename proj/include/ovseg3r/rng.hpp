// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_RNG_HPP
#define OVSEG3R_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ovseg3r {

/// Seeded generator with platform-independent draws. mt19937 output is
/// fully specified by the standard; the std distributions are not, so
/// bounded ints and gaussians are derived here by hand.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

  std::uint32_t next_u32() { return gen_(); }

  /// Uniform integer in [0, bound), unbiased via rejection. bound > 0.
  std::uint32_t below(std::uint32_t bound) {
    const std::uint32_t limit = UINT32_MAX - UINT32_MAX % bound;
    std::uint32_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return v % bound;
  }

  /// Uniform real in [0, 1) with 32 bits of resolution.
  double uniform() { return gen_() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double gaussian() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Fisher-Yates in-place shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(static_cast<std::uint32_t>(i))]);
  }

  /// k distinct values sampled from [0, n) in draw order.
  std::vector<std::uint32_t> sample_distinct(std::uint32_t n, std::uint32_t k) {
    std::vector<std::uint32_t> pool(n);
    for (std::uint32_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::uint32_t> out;
    out.reserve(k);
    for (std::uint32_t j = 0; j < k; ++j) {
      const std::uint32_t pick = j + below(n - j);
      std::swap(pool[j], pool[pick]);
      out.push_back(pool[j]);
    }
    return out;
  }

private:
  std::mt19937 gen_;
};

} // namespace ovseg3r

#endif // OVSEG3R_RNG_HPP
