// SPDX-License-Identifier: Apache-2.0

#include "dmlink/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dmlink/kernels.hpp"

namespace dmlink {

std::size_t NoiseSchedule::check(int t) const {
  if (t < 1 || t > steps()) {
    throw std::out_of_range("schedule step out of range: " +
                            std::to_string(t));
  }
  return static_cast<std::size_t>(t - 1);
}

NoiseSchedule build_linear_schedule(int steps, double alpha_first,
                                    double alpha_last) {
  if (steps < 1) throw std::invalid_argument("schedule needs at least 1 step");
  if (!(alpha_last > 0.0) || !(alpha_first < 1.0) ||
      !(alpha_last <= alpha_first)) {
    throw std::invalid_argument(
        "schedule requires 0 < alpha_last <= alpha_first < 1");
  }
  if (steps == 1 && alpha_first != alpha_last) {
    throw std::invalid_argument(
        "a 1-step schedule cannot interpolate distinct endpoints");
  }

  NoiseSchedule s;
  s.alpha_.resize(steps);
  s.alpha_bar_.resize(steps);
  s.noise_to_signal_.resize(steps);

  double bar = 1.0;
  for (int t = 1; t <= steps; ++t) {
    // Endpoints are pinned exactly; interior points interpolate.
    double a;
    if (t == 1) {
      a = alpha_first;
    } else if (t == steps) {
      a = alpha_last;
    } else {
      const double w = static_cast<double>(t - 1) / (steps - 1);
      a = alpha_first + (alpha_last - alpha_first) * w;
    }
    bar *= a;
    s.alpha_[t - 1] = a;
    s.alpha_bar_[t - 1] = bar;
    s.noise_to_signal_[t - 1] = (1.0 - bar) / bar;
  }
  return s;
}

int effective_sampling_step(const NoiseSchedule& sched, double sigma_sq_eff) {
  if (!(sigma_sq_eff >= 0.0)) {
    throw std::invalid_argument("sigma_sq_eff must be non-negative");
  }
  const int steps = sched.steps();
  // noise_to_signal is strictly increasing, so the closest entry is at the
  // insertion point or just before it.
  int lo = 1, hi = steps;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (sched.noise_to_signal(mid) < sigma_sq_eff) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  // lo is the first step with f(lo) >= sigma_sq_eff (or `steps` if none).
  if (lo > 1) {
    const double d_prev = sigma_sq_eff - sched.noise_to_signal(lo - 1);
    const double d_here = std::abs(sched.noise_to_signal(lo) - sigma_sq_eff);
    if (d_prev <= d_here) return lo - 1;
  }
  return lo;
}

DiffusionDraw forward_diffuse(const SignalBlock& x0, int t,
                              const NoiseSchedule& sched, RngStream& rng) {
  const double bar = sched.alpha_bar(t);
  DiffusionDraw d{SignalBlock(x0.rows(), x0.cols()),
                  SignalBlock(x0.rows(), x0.cols())};
  rng.fill_gaussian({d.eps.reals(), d.eps.real_count()}, std::sqrt(0.5));
  kernels::active().axpby(d.x_t.reals(), std::sqrt(bar), x0.reals(),
                          std::sqrt(1.0 - bar), d.eps.reals(),
                          x0.real_count());
  return d;
}

}  // namespace dmlink
