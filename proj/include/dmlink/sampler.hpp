// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "dmlink/channel.hpp"
#include "dmlink/complex_matrix.hpp"
#include "dmlink/predictor.hpp"
#include "dmlink/rng.hpp"
#include "dmlink/schedule.hpp"

namespace dmlink {

enum class StepBranch { noise_add, reverse };

struct SamplerTraceRow {
  int t;  // step the row was produced at (0 for the final output)
  int subchannel;
  StepBranch branch;
  double row_norm;
};

struct SamplerTrace {
  int m_max = 0;
  long predictor_calls = 0;
  std::vector<SamplerTraceRow> rows;
};

// Joint reverse-process state over all sub-channels at step t.
struct SamplerState {
  int t = 0;
  SignalBlock x;
  SignalBlock y_bar;
  SubchannelProfile profile;
};

// Scale each equalized row to unit power: y_bar_i = y_i / sqrt(1 + s2_i).
SignalBlock normalize_equalized(const SignalBlock& y_eq,
                                const SubchannelProfile& profile);

// Start at t = max_i m_i by re-noising every row from y_bar.
SamplerState init_state(const SignalBlock& y_bar,
                        const SubchannelProfile& profile,
                        const NoiseSchedule& sched, RngStream& rng,
                        SamplerTrace* trace = nullptr);

// Advance t -> t-1. Rows whose matched step lies at or below t-1 are
// re-noised from y_bar; the rest take a deterministic reverse-process step
// driven by one joint predictor call on the full block. Requires t >= 2.
void sampling_step(SamplerState& state, const PredictorModel& model,
                   const NoiseSchedule& sched, RngStream& rng,
                   SamplerTrace* trace = nullptr);

// Final reverse step from t = 1 to the signal estimate.
SignalBlock final_step(const SamplerState& state, const PredictorModel& model,
                       const NoiseSchedule& sched,
                       SamplerTrace* trace = nullptr);

// Full pipeline on an equalized block: profile, normalize (dead rows are
// replaced with fresh unit noise), re-noise, iterate, estimate.
std::pair<SignalBlock, SamplerTrace> denoise(const SignalBlock& y_eq,
                                             const ChannelRealization& ch,
                                             double sigma_sq,
                                             const PredictorModel& model,
                                             const NoiseSchedule& sched,
                                             RngStream& rng);

}  // namespace dmlink
