// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "dmlink/channel.hpp"
#include "dmlink/complex_matrix.hpp"
#include "dmlink/predictor.hpp"
#include "dmlink/rng.hpp"
#include "dmlink/schedule.hpp"

namespace dmlink {

enum class SourceKind { gaussian, mixture2 };

// Recipe for a source model; stages run in separate processes, so codecs
// persist this and later stages rebuild the identical model from it.
struct SourceSpec {
  int dim = 64;
  double cond = 10.0;
  SourceKind kind = SourceKind::gaussian;
  std::uint64_t seed = 7;
};

// Correlated real source: a random orthogonal basis with per-direction
// variances spanning `cond`, scaled to unit average variance. The mixture
// variant adds a symmetric two-mode offset along the widest direction.
struct SourceModel {
  SourceSpec spec;
  std::vector<double> basis;   // dim x dim, row-major, orthogonal
  std::vector<double> scales;  // per-direction standard deviations
  std::vector<double> offset;  // mode offset (empty for plain Gaussian)

  std::vector<double> sample(RngStream& rng) const;
};

SourceModel make_source_model(const SourceSpec& spec);

std::vector<std::vector<double>> make_source_set(const SourceModel& model,
                                                 int count, RngStream& rng);

// Affine encoder/decoder around the MIMO link. The encoder output is scaled
// by gamma so a reference batch maps to unit power per complex element;
// gamma is frozen while a stage trains and recalibrated at stage ends.
struct ToyCodec {
  int source_dim = 0;
  int antennas = 0;
  int block_len = 0;
  std::vector<double> enc_w;  // (2*antennas*block_len) x source_dim
  std::vector<double> enc_b;
  std::vector<double> dec_w;  // source_dim x (2*antennas*block_len)
  std::vector<double> dec_b;
  double gamma = 1.0;

  int channel_dim() const { return 2 * antennas * block_len; }
  double cbr() const {
    return static_cast<double>(block_len) / source_dim;
  }
};

ToyCodec make_toy_codec(int source_dim, int antennas, int block_len,
                        RngStream& rng);

SignalBlock encode(const ToyCodec& codec, const std::vector<double>& s);
std::vector<double> decode(const ToyCodec& codec, const SignalBlock& z);

// Mean encoder output power per complex element over a batch, at gamma = 1.
double reference_power(const ToyCodec& codec,
                       const std::vector<std::vector<double>>& batch);

// Reset gamma from the reference batch so encode() output has unit power.
void calibrate_power(ToyCodec& codec,
                     const std::vector<std::vector<double>>& batch);

// The fixed batch used for every calibration of a given source.
std::vector<std::vector<double>> make_reference_batch(const SourceModel& model);

// End-to-end reconstruction training of both affine maps through the
// equalized channel (no denoising). Per sample the SNR is uniform over
// snr_range_db and the channel is redrawn unless `fixed_channel` is given.
// After each epoch the encoder is rescaled to keep the reference batch at
// unit power (gamma itself stays frozen); gamma is recalibrated at the end.
TrainReport stage1_train(ToyCodec& codec,
                         const std::vector<std::vector<double>>& source_set,
                         const std::vector<std::vector<double>>& ref_batch,
                         double snr_min_db, double snr_max_db,
                         const TrainConfig& cfg, RngStream& rng,
                         const ChannelRealization* fixed_channel = nullptr);

// Decoder-only refit with the sampler in the forward pass. Encoder and
// gamma are left bit-identical; no gradient flows through denoise().
TrainReport stage3_retrain(ToyCodec& codec, const PredictorModel& model,
                           const NoiseSchedule& sched,
                           const std::vector<std::vector<double>>& source_set,
                           double snr_min_db, double snr_max_db,
                           const TrainConfig& cfg, RngStream& rng,
                           const ChannelRealization* fixed_channel = nullptr);

// Mean reconstruction MSE per source dimension over the given samples,
// one channel and noise draw each; denoises before decoding when `dm`
// (and `sched`) are non-null.
double codec_mse(const ToyCodec& codec,
                 const std::vector<std::vector<double>>& sources,
                 double snr_db, const PredictorModel* dm,
                 const NoiseSchedule* sched, RngStream& rng,
                 const ChannelRealization* fixed_channel = nullptr);

void save_codec(const std::filesystem::path& path, const ToyCodec& codec,
                const SourceSpec& source);
std::pair<ToyCodec, SourceSpec> load_codec(const std::filesystem::path& path);

}  // namespace dmlink
