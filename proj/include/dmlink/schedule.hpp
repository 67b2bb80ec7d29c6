// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dmlink/complex_matrix.hpp"
#include "dmlink/rng.hpp"

namespace dmlink {

// Variance schedule for the forward noising process. Steps are 1-based:
// alpha(1) = alpha_first, alpha(T) = alpha_last, linear in between.
// alpha_bar(t) is the running product and noise_to_signal(t) =
// (1 - alpha_bar(t)) / alpha_bar(t) grows strictly with t, which is what
// lets a noise power be matched to a step.
class NoiseSchedule {
 public:
  int steps() const { return static_cast<int>(alpha_.size()); }
  double alpha(int t) const { return alpha_[check(t)]; }
  double alpha_bar(int t) const { return alpha_bar_[check(t)]; }
  double noise_to_signal(int t) const { return noise_to_signal_[check(t)]; }

  friend NoiseSchedule build_linear_schedule(int steps, double alpha_first,
                                             double alpha_last);

 private:
  std::size_t check(int t) const;

  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> noise_to_signal_;
};

NoiseSchedule build_linear_schedule(int steps, double alpha_first,
                                    double alpha_last);

// Step whose noise-to-signal ratio is closest to sigma_sq_eff
// (ties resolve to the smaller step).
int effective_sampling_step(const NoiseSchedule& sched, double sigma_sq_eff);

struct DiffusionDraw {
  SignalBlock x_t;
  SignalBlock eps;  // the unit complex Gaussian that was injected
};

// x_t = sqrt(alpha_bar(t)) * x0 + sqrt(1 - alpha_bar(t)) * eps.
DiffusionDraw forward_diffuse(const SignalBlock& x0, int t,
                              const NoiseSchedule& sched, RngStream& rng);

}  // namespace dmlink
