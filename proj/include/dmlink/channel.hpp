// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <vector>

#include "dmlink/complex_matrix.hpp"
#include "dmlink/rng.hpp"
#include "dmlink/schedule.hpp"

namespace dmlink {

// Singular values below this are treated as a dead sub-channel.
inline constexpr double kSingularLambda = 1e-9;

// A flat-fading square MIMO channel together with its SVD, H = U S V^H.
// Singular values are sorted in descending order.
struct ChannelRealization {
  ComplexMatrix h;
  ComplexMatrix u;
  ComplexMatrix v;
  std::vector<double> lambda;

  int antennas() const { return h.rows(); }
};

class SingularChannel : public std::runtime_error {
 public:
  SingularChannel(int subchannel, double lambda);
  int subchannel() const { return subchannel_; }

 private:
  int subchannel_;
};

// Per-sub-channel quantities the sampler needs: effective noise power after
// equalization, the unit-power normalization factor, and the matched
// sampling step. Dead sub-channels are flagged and pinned to the last step.
struct SubchannelProfile {
  std::vector<double> lambda;
  std::vector<double> sigma_sq_eff;
  std::vector<double> norm_factor;
  std::vector<int> step;
  std::vector<char> degraded;

  int count() const { return static_cast<int>(step.size()); }
  int max_step() const;
  bool any_degraded() const;
};

// H with i.i.d. unit complex Gaussian entries.
ChannelRealization sample_rayleigh_channel(int antennas, RngStream& rng);

// Wrap an explicit square matrix (used to craft edge cases).
ChannelRealization channel_from_matrix(const ComplexMatrix& h);

// Total transmit power is one per complex element, antennas in total, so
// sigma^2 = antennas * 10^(-snr_db / 10).
double snr_to_noise_power(double snr_db, int antennas);

// W = V Z.
SignalBlock precode(const SignalBlock& z, const ChannelRealization& ch);

// Y = H W + N with N entries CN(0, sigma_sq).
SignalBlock transmit(const SignalBlock& w, const ChannelRealization& ch,
                     double sigma_sq, RngStream& rng);

// Y' = S^-1 U^H Y. Throws SingularChannel if any sub-channel is dead.
SignalBlock equalize(const SignalBlock& y, const ChannelRealization& ch);

// Same, but dead sub-channel rows are zeroed instead of divided; pair with
// the profile's degraded flags (denoise() replaces those rows).
SignalBlock equalize_with_profile(const SignalBlock& y,
                                  const ChannelRealization& ch,
                                  const SubchannelProfile& profile);

SubchannelProfile build_profile(const ChannelRealization& ch, double sigma_sq,
                                const NoiseSchedule& sched);

}  // namespace dmlink
