// SPDX-License-Identifier: Apache-2.0

#include "dmlink/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dmlink {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t RngStream::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_index: bound is zero");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = bound * (UINT64_MAX / bound);
  std::uint64_t v;
  do {
    v = gen_();
  } while (v >= limit);
  return v % bound;
}

double RngStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 =
      (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

std::complex<double> RngStream::cgaussian(double var) {
  const double s = std::sqrt(0.5 * var);
  const double re = s * gaussian();
  const double im = s * gaussian();
  return {re, im};
}

void RngStream::fill_gaussian(std::span<double> out, double stddev) {
  for (double& v : out) v = stddev * gaussian();
}

RngStream derive_stream(std::uint64_t master_seed, std::string_view tag,
                        std::uint64_t index) {
  std::uint64_t h = splitmix64(master_seed ^ fnv1a64(tag));
  h = splitmix64(h ^ index);
  return RngStream(h);
}

}  // namespace dmlink
