// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace dmlink {

// Deterministic random stream. The Gaussian path is an explicit Box-Muller
// transform (with spare caching) instead of std::normal_distribution, so the
// produced sequence is pinned by this code alone and stays identical across
// standard library versions.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer on [0, bound). bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound);

  // Standard normal N(0, 1).
  double gaussian();

  // Complex circular Gaussian with total variance `var`
  // (real and imaginary parts are each N(0, var/2)).
  std::complex<double> cgaussian(double var = 1.0);

  void fill_gaussian(std::span<double> out, double stddev);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Child stream for (experiment tag, trial index) under a master seed.
// Distinct (tag, index) pairs give statistically independent streams;
// the derivation is a fixed hash, stable across runs and platforms.
RngStream derive_stream(std::uint64_t master_seed, std::string_view tag,
                        std::uint64_t index);

}  // namespace dmlink
