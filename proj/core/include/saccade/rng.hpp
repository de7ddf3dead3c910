// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random streams. All distribution transforms are hand-rolled
// so results are stable across standard libraries; every consumer receives
// an explicit stream, there is no global generator.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace saccade {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0,1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal();

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Index sampled from unnormalized non-negative weights.
  std::size_t categorical(std::span<const float> weights) { return categorical_impl(weights); }
  std::size_t categorical(std::span<const double> weights) { return categorical_impl(weights); }
  std::size_t categorical(const std::vector<double>& weights) {
    return categorical_impl(std::span<const double>(weights));
  }

  // Rademacher +/-1.
  float sign() { return (gen_() & 1u) ? 1.0f : -1.0f; }

 private:
  template <class T>
  std::size_t categorical_impl(std::span<const T> weights) {
    double total = 0.0;
    for (T w : weights) {
      if (w < T(0) || !std::isfinite(static_cast<double>(w)))
        throw std::invalid_argument("categorical: bad weight");
      total += static_cast<double>(w);
    }
    if (total <= 0.0) throw std::invalid_argument("categorical: zero total weight");
    double r = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      r -= static_cast<double>(weights[i]);
      if (r < 0.0) return i;
    }
    return weights.size() - 1;
  }

  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Splits one root seed into independent named streams ("data", "init",
// "policy", "attack", "eval", ...), optionally salted by an index.
class RngPool {
 public:
  explicit RngPool(std::uint64_t root_seed) : root_(root_seed) {}

  std::uint64_t root() const { return root_; }
  std::uint64_t stream_seed(std::string_view name, std::uint64_t salt = 0) const;
  Rng stream(std::string_view name, std::uint64_t salt = 0) const {
    return Rng(stream_seed(name, salt));
  }

 private:
  std::uint64_t root_;
};

}  // namespace saccade
