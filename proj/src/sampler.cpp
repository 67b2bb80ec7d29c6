// SPDX-License-Identifier: Apache-2.0

#include "dmlink/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "dmlink/kernels.hpp"

namespace dmlink {
namespace {

double row_norm(const SignalBlock& x, int i) {
  return std::sqrt(kernels::active().sum_sq(
      x.row_reals(i), 2 * static_cast<std::size_t>(x.cols())));
}

void record(SamplerTrace* trace, int t, int subchannel, StepBranch branch,
            double norm) {
  if (trace != nullptr) trace->rows.push_back({t, subchannel, branch, norm});
}

// x_i at step t, re-noised from the normalized equalized row: the forward
// ratio between t and the row's matched step m_i sets the noise mix.
void renoise_row(SignalBlock& x, const SignalBlock& y_bar, int i, int t,
                 int m_i, const NoiseSchedule& sched, RngStream& rng) {
  const double ratio = sched.alpha_bar(t) / sched.alpha_bar(m_i);
  const std::size_t n = 2 * static_cast<std::size_t>(x.cols());
  thread_local std::vector<double> eps;
  eps.resize(n);
  rng.fill_gaussian(eps, std::sqrt(0.5));
  kernels::active().axpby(x.row_reals(i), std::sqrt(ratio), y_bar.row_reals(i),
                          std::sqrt(1.0 - ratio), eps.data(), n);
}

}  // namespace

SignalBlock normalize_equalized(const SignalBlock& y_eq,
                                const SubchannelProfile& profile) {
  if (y_eq.rows() != profile.count()) {
    throw std::invalid_argument("normalize_equalized: row count mismatch");
  }
  SignalBlock out(y_eq.rows(), y_eq.cols());
  const auto& kt = kernels::active();
  for (int i = 0; i < out.rows(); ++i) {
    kt.scale(out.row_reals(i), profile.norm_factor[i], y_eq.row_reals(i),
             2 * static_cast<std::size_t>(out.cols()));
  }
  return out;
}

SamplerState init_state(const SignalBlock& y_bar,
                        const SubchannelProfile& profile,
                        const NoiseSchedule& sched, RngStream& rng,
                        SamplerTrace* trace) {
  if (y_bar.rows() != profile.count()) {
    throw std::invalid_argument("init_state: row count mismatch");
  }
  SamplerState state;
  state.t = profile.max_step();
  state.x = SignalBlock(y_bar.rows(), y_bar.cols());
  state.y_bar = y_bar;
  state.profile = profile;
  if (trace != nullptr) trace->m_max = state.t;
  for (int i = 0; i < y_bar.rows(); ++i) {
    renoise_row(state.x, state.y_bar, i, state.t, profile.step[i], sched, rng);
    record(trace, state.t, i, StepBranch::noise_add, row_norm(state.x, i));
  }
  return state;
}

void sampling_step(SamplerState& state, const PredictorModel& model,
                   const NoiseSchedule& sched, RngStream& rng,
                   SamplerTrace* trace) {
  const int t = state.t;
  if (t < 2) throw std::logic_error("sampling_step requires t >= 2");

  const SignalBlock eps_hat = predict_epsilon(
      model, PredictorQuery{state.x, state.profile.lambda, t,
                            sched.alpha_bar(t)});
  if (trace != nullptr) ++trace->predictor_calls;

  const double bar_t = sched.alpha_bar(t);
  const double bar_p = sched.alpha_bar(t - 1);
  // Reverse update x <- c1 * x + c2 * eps_hat.
  const double c1 = std::sqrt(bar_p) / std::sqrt(bar_t);
  const double c2 = -c1 * std::sqrt(1.0 - bar_t) + std::sqrt(1.0 - bar_p);

  const auto& kt = kernels::active();
  const std::size_t n = 2 * static_cast<std::size_t>(state.x.cols());
  for (int i = 0; i < state.x.rows(); ++i) {
    if (state.profile.step[i] <= t - 1) {
      renoise_row(state.x, state.y_bar, i, t - 1, state.profile.step[i], sched,
                  rng);
      record(trace, t - 1, i, StepBranch::noise_add, row_norm(state.x, i));
    } else {
      kt.axpby(state.x.row_reals(i), c1, state.x.row_reals(i), c2,
               eps_hat.row_reals(i), n);
      record(trace, t - 1, i, StepBranch::reverse, row_norm(state.x, i));
    }
  }
  state.t = t - 1;
}

SignalBlock final_step(const SamplerState& state, const PredictorModel& model,
                       const NoiseSchedule& sched, SamplerTrace* trace) {
  if (state.t != 1) throw std::logic_error("final_step requires t == 1");
  const SignalBlock eps_hat = predict_epsilon(
      model,
      PredictorQuery{state.x, state.profile.lambda, 1, sched.alpha_bar(1)});
  if (trace != nullptr) ++trace->predictor_calls;

  const double bar_1 = sched.alpha_bar(1);
  const double c1 = 1.0 / std::sqrt(bar_1);
  const double c2 = -std::sqrt(1.0 - bar_1) / std::sqrt(bar_1);
  SignalBlock z(state.x.rows(), state.x.cols());
  kernels::active().axpby(z.reals(), c1, state.x.reals(), c2, eps_hat.reals(),
                          z.real_count());
  if (trace != nullptr) {
    for (int i = 0; i < z.rows(); ++i) {
      record(trace, 0, i, StepBranch::reverse, row_norm(z, i));
    }
  }
  return z;
}

std::pair<SignalBlock, SamplerTrace> denoise(const SignalBlock& y_eq,
                                             const ChannelRealization& ch,
                                             double sigma_sq,
                                             const PredictorModel& model,
                                             const NoiseSchedule& sched,
                                             RngStream& rng) {
  if (y_eq.rows() != ch.antennas()) {
    throw std::invalid_argument("denoise: row count must match antennas");
  }
  const SubchannelProfile profile = build_profile(ch, sigma_sq, sched);
  SignalBlock y_bar = normalize_equalized(y_eq, profile);
  for (int i = 0; i < y_bar.rows(); ++i) {
    // A dead sub-channel carries no information; its normalized row is
    // modeled as a fresh unit-power draw.
    if (profile.degraded[i]) {
      rng.fill_gaussian(
          {y_bar.row_reals(i), 2 * static_cast<std::size_t>(y_bar.cols())},
          std::sqrt(0.5));
    }
  }

  SamplerTrace trace;
  SamplerState state = init_state(y_bar, profile, sched, rng, &trace);
  while (state.t >= 2) sampling_step(state, model, sched, rng, &trace);
  SignalBlock z = final_step(state, model, sched, &trace);
  return {std::move(z), std::move(trace)};
}

}  // namespace dmlink
