// SPDX-License-Identifier: Apache-2.0

#include "dmlink/channel.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

#include "dmlink/kernels.hpp"

namespace dmlink {
namespace {

using EigenRowMajor =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic,
                  Eigen::RowMajor>;

ComplexMatrix from_eigen(const EigenRowMajor& m) {
  ComplexMatrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int i = 0; i < out.rows(); ++i) {
    for (int j = 0; j < out.cols(); ++j) out.at(i, j) = m(i, j);
  }
  return out;
}

ChannelRealization decompose(ComplexMatrix h) {
  Eigen::Map<const EigenRowMajor> mapped(h.row(0), h.rows(), h.cols());
  Eigen::JacobiSVD<EigenRowMajor> svd(mapped,
                                      Eigen::ComputeFullU | Eigen::ComputeFullV);
  ChannelRealization ch;
  ch.u = from_eigen(svd.matrixU());
  ch.v = from_eigen(svd.matrixV());
  ch.lambda.assign(svd.singularValues().data(),
                   svd.singularValues().data() + svd.singularValues().size());
  ch.h = std::move(h);
  return ch;
}

}  // namespace

SingularChannel::SingularChannel(int subchannel, double lambda)
    : std::runtime_error("sub-channel " + std::to_string(subchannel + 1) +
                         " is singular (lambda = " + std::to_string(lambda) +
                         ")"),
      subchannel_(subchannel) {}

int SubchannelProfile::max_step() const {
  return *std::max_element(step.begin(), step.end());
}

bool SubchannelProfile::any_degraded() const {
  return std::find(degraded.begin(), degraded.end(), char{1}) != degraded.end();
}

ChannelRealization sample_rayleigh_channel(int antennas, RngStream& rng) {
  if (antennas < 1) throw std::invalid_argument("antennas must be positive");
  ComplexMatrix h(antennas, antennas);
  for (int i = 0; i < antennas; ++i) {
    for (int j = 0; j < antennas; ++j) h.at(i, j) = rng.cgaussian(1.0);
  }
  return decompose(std::move(h));
}

ChannelRealization channel_from_matrix(const ComplexMatrix& h) {
  if (h.rows() != h.cols() || h.rows() < 1) {
    throw std::invalid_argument("channel matrix must be square");
  }
  if (!h.is_finite()) {
    throw std::invalid_argument("channel matrix has non-finite entries");
  }
  return decompose(h);
}

double snr_to_noise_power(double snr_db, int antennas) {
  if (antennas < 1) throw std::invalid_argument("antennas must be positive");
  return antennas * std::pow(10.0, -snr_db / 10.0);
}

SignalBlock precode(const SignalBlock& z, const ChannelRealization& ch) {
  if (z.rows() != ch.antennas()) {
    throw std::invalid_argument("precode: row count must match antennas");
  }
  return matmul(ch.v, z);
}

SignalBlock transmit(const SignalBlock& w, const ChannelRealization& ch,
                     double sigma_sq, RngStream& rng) {
  if (w.rows() != ch.antennas()) {
    throw std::invalid_argument("transmit: row count must match antennas");
  }
  if (!(sigma_sq >= 0.0)) {
    throw std::invalid_argument("transmit: sigma_sq must be non-negative");
  }
  SignalBlock y = matmul(ch.h, w);
  if (sigma_sq > 0.0) {
    const double s = std::sqrt(0.5 * sigma_sq);
    double* p = y.reals();
    for (std::size_t i = 0; i < y.real_count(); ++i) p[i] += s * rng.gaussian();
  }
  return y;
}

SignalBlock equalize(const SignalBlock& y, const ChannelRealization& ch) {
  for (int i = 0; i < ch.antennas(); ++i) {
    if (ch.lambda[i] < kSingularLambda) throw SingularChannel(i, ch.lambda[i]);
  }
  SignalBlock out = adjoint_matmul(ch.u, y);
  const auto& kt = kernels::active();
  for (int i = 0; i < out.rows(); ++i) {
    kt.scale(out.row_reals(i), 1.0 / ch.lambda[i], out.row_reals(i),
             2 * static_cast<std::size_t>(out.cols()));
  }
  return out;
}

SignalBlock equalize_with_profile(const SignalBlock& y,
                                  const ChannelRealization& ch,
                                  const SubchannelProfile& profile) {
  SignalBlock out = adjoint_matmul(ch.u, y);
  const auto& kt = kernels::active();
  for (int i = 0; i < out.rows(); ++i) {
    const double g = profile.degraded[i] ? 0.0 : 1.0 / ch.lambda[i];
    kt.scale(out.row_reals(i), g, out.row_reals(i),
             2 * static_cast<std::size_t>(out.cols()));
  }
  return out;
}

SubchannelProfile build_profile(const ChannelRealization& ch, double sigma_sq,
                                const NoiseSchedule& sched) {
  if (!(sigma_sq >= 0.0)) {
    throw std::invalid_argument("build_profile: sigma_sq must be non-negative");
  }
  const int m = ch.antennas();
  SubchannelProfile p;
  p.lambda = ch.lambda;
  p.sigma_sq_eff.resize(m);
  p.norm_factor.resize(m);
  p.step.resize(m);
  p.degraded.resize(m);
  for (int i = 0; i < m; ++i) {
    const bool dead = ch.lambda[i] < kSingularLambda;
    // A dead sub-channel carries no signal; pin it to the noisiest step.
    const double s2 = dead ? sched.noise_to_signal(sched.steps())
                           : sigma_sq / (ch.lambda[i] * ch.lambda[i]);
    p.degraded[i] = dead ? 1 : 0;
    p.sigma_sq_eff[i] = s2;
    p.norm_factor[i] = 1.0 / std::sqrt(1.0 + s2);
    p.step[i] = dead ? sched.steps() : effective_sampling_step(sched, s2);
  }
  return p;
}

}  // namespace dmlink
