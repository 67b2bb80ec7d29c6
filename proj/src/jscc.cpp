// SPDX-License-Identifier: Apache-2.0

#include "dmlink/jscc.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "dmlink/checkpoint.hpp"
#include "dmlink/kernels.hpp"
#include "dmlink/optim.hpp"
#include "dmlink/sampler.hpp"

namespace dmlink {
namespace {

constexpr int kReferenceBatch = 4096;
// Fraction of source power carried by the mode offset in the mixture model.
constexpr double kModePowerFrac = 0.25;

void check_codec(const ToyCodec& c) {
  if (c.source_dim < 1 || c.antennas < 1 || c.block_len < 1) {
    throw std::invalid_argument("codec dimensions must be positive");
  }
  const std::size_t cd = static_cast<std::size_t>(c.channel_dim());
  if (c.enc_w.size() != cd * c.source_dim || c.enc_b.size() != cd ||
      c.dec_w.size() != cd * c.source_dim ||
      c.dec_b.size() != static_cast<std::size_t>(c.source_dim)) {
    throw std::invalid_argument("codec parameter shapes are inconsistent");
  }
}

// Encoder output before gamma, flat layout matching SignalBlock::reals().
void encode_raw(const ToyCodec& c, const double* s, double* out) {
  const auto& kt = kernels::active();
  const int cd = c.channel_dim();
  for (int j = 0; j < cd; ++j) {
    out[j] = kt.dot(c.enc_w.data() + static_cast<std::size_t>(j) * c.source_dim,
                    s, c.source_dim) +
             c.enc_b[j];
  }
}

struct BatchScratch {
  std::vector<double> s;      // B x n
  std::vector<double> u;      // B x cd, pre-gamma encoder output
  std::vector<double> r;      // B x cd, received flat blocks
  std::vector<double> s_hat;  // B x n
  std::vector<double> ds;     // B x n
  std::vector<double> dr;     // B x cd
  std::vector<double> g_dec_w, g_dec_b, g_enc_w, g_enc_b;

  void resize(const ToyCodec& c, int batch) {
    const std::size_t b = batch;
    const std::size_t n = c.source_dim;
    const std::size_t cd = c.channel_dim();
    s.resize(b * n);
    u.resize(b * cd);
    r.resize(b * cd);
    s_hat.resize(b * n);
    ds.resize(b * n);
    dr.resize(b * cd);
    g_dec_w.resize(c.dec_w.size());
    g_dec_b.resize(c.dec_b.size());
    g_enc_w.resize(c.enc_w.size());
    g_enc_b.resize(c.enc_b.size());
  }
};

void fill_sources(const std::vector<std::vector<double>>& set, int batch,
                  int dim, RngStream& rng, std::vector<double>& out) {
  for (int b = 0; b < batch; ++b) {
    const std::vector<double>& s = set[rng.uniform_index(set.size())];
    std::memcpy(out.data() + static_cast<std::size_t>(b) * dim, s.data(),
                dim * sizeof(double));
  }
}

void check_set(const std::vector<std::vector<double>>& set, int dim,
               const char* what) {
  if (set.empty()) {
    throw std::invalid_argument(std::string(what) + ": empty source set");
  }
  for (const auto& s : set) {
    if (static_cast<int>(s.size()) != dim) {
      throw std::invalid_argument(std::string(what) +
                                  ": source dimension mismatch");
    }
  }
}

// Affine head shared by both stages: s_hat = R dec_w^T + dec_b, squared
// error per source dimension, and the decoder gradients.
double decoder_pass(const ToyCodec& c, int batch, BatchScratch& w) {
  const auto& kt = kernels::active();
  const int n = c.source_dim;
  const int cd = c.channel_dim();
  kt.gemm_nt(w.s_hat.data(), w.r.data(), c.dec_w.data(), batch, cd, n);
  for (int b = 0; b < batch; ++b) {
    double* row = w.s_hat.data() + static_cast<std::size_t>(b) * n;
    for (int j = 0; j < n; ++j) row[j] += c.dec_b[j];
  }
  const double norm = static_cast<double>(batch) * n;
  const double loss =
      kt.sum_sq_diff(w.s_hat.data(), w.s.data(), w.s_hat.size()) / norm;
  kt.axpby(w.ds.data(), 2.0 / norm, w.s_hat.data(), -2.0 / norm, w.s.data(),
           w.ds.size());
  kt.gemm_tn(w.g_dec_w.data(), w.ds.data(), w.r.data(), batch, n, cd);
  std::fill(w.g_dec_b.begin(), w.g_dec_b.end(), 0.0);
  for (int b = 0; b < batch; ++b) {
    const double* row = w.ds.data() + static_cast<std::size_t>(b) * n;
    for (int j = 0; j < n; ++j) w.g_dec_b[j] += row[j];
  }
  return loss;
}

double draw_snr(double snr_min_db, double snr_max_db, RngStream& rng) {
  return snr_min_db + (snr_max_db - snr_min_db) * rng.uniform();
}

void scale_encoder(ToyCodec& c, double factor) {
  const auto& kt = kernels::active();
  kt.scale(c.enc_w.data(), factor, c.enc_w.data(), c.enc_w.size());
  kt.scale(c.enc_b.data(), factor, c.enc_b.data(), c.enc_b.size());
}

}  // namespace

std::vector<double> SourceModel::sample(RngStream& rng) const {
  const int n = spec.dim;
  const auto& kt = kernels::active();
  std::vector<double> g(n);
  rng.fill_gaussian(g, 1.0);
  for (int i = 0; i < n; ++i) g[i] *= scales[i];
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) {
    x[i] = kt.dot(basis.data() + static_cast<std::size_t>(i) * n, g.data(), n);
  }
  if (!offset.empty()) {
    const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) x[i] += sign * offset[i];
  }
  return x;
}

SourceModel make_source_model(const SourceSpec& spec) {
  if (spec.dim < 1) throw std::invalid_argument("source dim must be positive");
  if (!(spec.cond >= 1.0)) {
    throw std::invalid_argument("source condition number must be >= 1");
  }
  const int n = spec.dim;
  RngStream rng = derive_stream(spec.seed, "source-model", 0);

  // Haar-ish orthogonal basis: QR of a Gaussian matrix with the sign of
  // R's diagonal folded into Q's columns.
  Eigen::MatrixXd gauss(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) gauss(i, j) = rng.gaussian();
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }

  SourceModel m;
  m.spec = spec;
  m.basis.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      m.basis[static_cast<std::size_t>(i) * n + j] = q(i, j);
    }
  }

  // Per-direction variances span `cond` geometrically, unit mean.
  std::vector<double> var(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    var[i] = n > 1 ? std::pow(spec.cond, -static_cast<double>(i) / (n - 1))
                   : 1.0;
    total += var[i];
  }
  const double within = spec.kind == SourceKind::mixture2
                            ? 1.0 - kModePowerFrac
                            : 1.0;
  m.scales.resize(n);
  for (int i = 0; i < n; ++i) {
    m.scales[i] = std::sqrt(var[i] * n * within / total);
  }

  if (spec.kind == SourceKind::mixture2) {
    // Offset along the widest direction, carrying kModePowerFrac of the
    // unit average variance.
    const double mag = std::sqrt(kModePowerFrac * n);
    m.offset.resize(n);
    for (int i = 0; i < n; ++i) {
      m.offset[i] = mag * m.basis[static_cast<std::size_t>(i) * n];
    }
  }
  return m;
}

std::vector<std::vector<double>> make_source_set(const SourceModel& model,
                                                 int count, RngStream& rng) {
  if (count < 1) throw std::invalid_argument("source set count must be >= 1");
  std::vector<std::vector<double>> set;
  set.reserve(count);
  for (int i = 0; i < count; ++i) set.push_back(model.sample(rng));
  return set;
}

ToyCodec make_toy_codec(int source_dim, int antennas, int block_len,
                        RngStream& rng) {
  if (source_dim < 1 || antennas < 1 || block_len < 1) {
    throw std::invalid_argument("codec dimensions must be positive");
  }
  ToyCodec c;
  c.source_dim = source_dim;
  c.antennas = antennas;
  c.block_len = block_len;
  const int cd = c.channel_dim();
  const double limit = std::sqrt(6.0 / (source_dim + cd));
  c.enc_w.resize(static_cast<std::size_t>(cd) * source_dim);
  for (double& w : c.enc_w) w = limit * (2.0 * rng.uniform() - 1.0);
  c.enc_b.assign(cd, 0.0);
  c.dec_w.resize(static_cast<std::size_t>(cd) * source_dim);
  for (double& w : c.dec_w) w = limit * (2.0 * rng.uniform() - 1.0);
  c.dec_b.assign(source_dim, 0.0);
  return c;
}

SignalBlock encode(const ToyCodec& codec, const std::vector<double>& s) {
  check_codec(codec);
  if (static_cast<int>(s.size()) != codec.source_dim) {
    throw std::invalid_argument("encode: source dimension mismatch");
  }
  std::vector<double> u(codec.channel_dim());
  encode_raw(codec, s.data(), u.data());
  SignalBlock z(codec.antennas, codec.block_len);
  kernels::active().scale(z.reals(), codec.gamma, u.data(), u.size());
  return z;
}

std::vector<double> decode(const ToyCodec& codec, const SignalBlock& z) {
  check_codec(codec);
  if (z.rows() != codec.antennas || z.cols() != codec.block_len) {
    throw std::invalid_argument("decode: block shape mismatch");
  }
  const auto& kt = kernels::active();
  const int cd = codec.channel_dim();
  std::vector<double> s(codec.source_dim);
  for (int i = 0; i < codec.source_dim; ++i) {
    s[i] = kt.dot(codec.dec_w.data() + static_cast<std::size_t>(i) * cd,
                  z.reals(), cd) +
           codec.dec_b[i];
  }
  return s;
}

double reference_power(const ToyCodec& codec,
                       const std::vector<std::vector<double>>& batch) {
  check_codec(codec);
  check_set(batch, codec.source_dim, "reference_power");
  const auto& kt = kernels::active();
  std::vector<double> u(codec.channel_dim());
  double total = 0.0;
  for (const auto& s : batch) {
    encode_raw(codec, s.data(), u.data());
    total += kt.sum_sq(u.data(), u.size());
  }
  const double elems = static_cast<double>(batch.size()) * codec.antennas *
                       codec.block_len;
  return total / elems;
}

void calibrate_power(ToyCodec& codec,
                     const std::vector<std::vector<double>>& batch) {
  const double p = reference_power(codec, batch);
  if (!(p > 0.0)) {
    throw std::runtime_error("calibrate_power: encoder output power is zero");
  }
  codec.gamma = 1.0 / std::sqrt(p);
}

std::vector<std::vector<double>> make_reference_batch(const SourceModel& model) {
  RngStream rng = derive_stream(model.spec.seed, "power-ref", 0);
  return make_source_set(model, kReferenceBatch, rng);
}

TrainReport stage1_train(ToyCodec& codec,
                         const std::vector<std::vector<double>>& source_set,
                         const std::vector<std::vector<double>>& ref_batch,
                         double snr_min_db, double snr_max_db,
                         const TrainConfig& cfg, RngStream& rng,
                         const ChannelRealization* fixed_channel) {
  check_codec(codec);
  check_set(source_set, codec.source_dim, "stage1_train");
  check_set(ref_batch, codec.source_dim, "stage1_train");
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw std::invalid_argument("stage1_train: bad epochs or batch size");
  }
  if (!(snr_min_db <= snr_max_db)) {
    throw std::invalid_argument("stage1_train: SNR range is inverted");
  }

  calibrate_power(codec, ref_batch);

  const auto& kt = kernels::active();
  const int batch = cfg.batch_size;
  const int n = codec.source_dim;
  const int cd = codec.channel_dim();
  const int spe = cfg.steps_per_epoch > 0
                      ? cfg.steps_per_epoch
                      : static_cast<int>((source_set.size() + batch - 1) /
                                         batch);
  const long total_steps = static_cast<long>(cfg.epochs) * spe;

  BatchScratch w;
  w.resize(codec, batch);
  AdamSlot a_enc_w, a_enc_b, a_dec_w, a_dec_b;
  a_enc_w.init(codec.enc_w.size());
  a_enc_b.init(codec.enc_b.size());
  a_dec_w.init(codec.dec_w.size());
  a_dec_b.init(codec.dec_b.size());

  TrainReport report;
  long gstep = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int step = 0; step < spe; ++step, ++gstep) {
      fill_sources(source_set, batch, n, rng, w.s);
      kt.gemm_nt(w.u.data(), w.s.data(), codec.enc_w.data(), batch, n, cd);
      for (int b = 0; b < batch; ++b) {
        double* row = w.u.data() + static_cast<std::size_t>(b) * cd;
        for (int j = 0; j < cd; ++j) row[j] += codec.enc_b[j];
        SignalBlock z(codec.antennas, codec.block_len);
        kt.scale(z.reals(), codec.gamma, row, cd);

        const ChannelRealization ch = fixed_channel != nullptr
                                          ? *fixed_channel
                                          : sample_rayleigh_channel(
                                                codec.antennas, rng);
        const double sigma_sq = snr_to_noise_power(
            draw_snr(snr_min_db, snr_max_db, rng), codec.antennas);
        const SignalBlock y = transmit(precode(z, ch), ch, sigma_sq, rng);
        const SignalBlock y_eq = equalize(y, ch);
        std::memcpy(w.r.data() + static_cast<std::size_t>(b) * cd,
                    y_eq.reals(), cd * sizeof(double));
      }

      const double loss = decoder_pass(codec, batch, w);
      if (!std::isfinite(loss)) throw TrainingDiverged(gstep);
      epoch_loss += loss;

      // The equalized block is the encoded block plus independent noise,
      // so the loss gradient passes straight through to the encoder.
      kt.gemm_nn(w.dr.data(), w.ds.data(), codec.dec_w.data(), batch, n, cd);
      kt.gemm_tn(w.g_enc_w.data(), w.dr.data(), w.s.data(), batch, cd, n);
      kt.scale(w.g_enc_w.data(), codec.gamma, w.g_enc_w.data(),
               w.g_enc_w.size());
      std::fill(w.g_enc_b.begin(), w.g_enc_b.end(), 0.0);
      for (int b = 0; b < batch; ++b) {
        const double* row = w.dr.data() + static_cast<std::size_t>(b) * cd;
        for (int j = 0; j < cd; ++j) w.g_enc_b[j] += row[j];
      }
      kt.scale(w.g_enc_b.data(), codec.gamma, w.g_enc_b.data(),
               w.g_enc_b.size());

      const double lr =
          lr_at(gstep, total_steps, cfg.learning_rate, cfg.warmup_frac);
      adam_update(a_enc_w, codec.enc_w, w.g_enc_w, lr, gstep + 1);
      adam_update(a_enc_b, codec.enc_b, w.g_enc_b, lr, gstep + 1);
      adam_update(a_dec_w, codec.dec_w, w.g_dec_w, lr, gstep + 1);
      adam_update(a_dec_b, codec.dec_b, w.g_dec_b, lr, gstep + 1);
    }
    report.epoch_loss.push_back(epoch_loss / spe);

    // Keep the frozen gamma honest: undo any power drift the optimizer
    // introduced, measured on the fixed reference batch.
    const double p = reference_power(codec, ref_batch);
    if (!(p > 0.0)) throw TrainingDiverged(gstep);
    scale_encoder(codec, 1.0 / (codec.gamma * std::sqrt(p)));
  }
  report.steps = gstep;

  calibrate_power(codec, ref_batch);
  return report;
}

TrainReport stage3_retrain(ToyCodec& codec, const PredictorModel& model,
                           const NoiseSchedule& sched,
                           const std::vector<std::vector<double>>& source_set,
                           double snr_min_db, double snr_max_db,
                           const TrainConfig& cfg, RngStream& rng,
                           const ChannelRealization* fixed_channel) {
  check_codec(codec);
  check_set(source_set, codec.source_dim, "stage3_retrain");
  if (cfg.epochs < 0 || cfg.batch_size < 1) {
    throw std::invalid_argument("stage3_retrain: bad epochs or batch size");
  }
  if (!(snr_min_db <= snr_max_db)) {
    throw std::invalid_argument("stage3_retrain: SNR range is inverted");
  }

  const auto& kt = kernels::active();
  const int batch = cfg.batch_size;
  const int n = codec.source_dim;
  const int cd = codec.channel_dim();
  const int spe = cfg.steps_per_epoch > 0
                      ? cfg.steps_per_epoch
                      : static_cast<int>((source_set.size() + batch - 1) /
                                         batch);
  const long total_steps = static_cast<long>(std::max(cfg.epochs, 1)) * spe;

  BatchScratch w;
  w.resize(codec, batch);
  AdamSlot a_dec_w, a_dec_b;
  a_dec_w.init(codec.dec_w.size());
  a_dec_b.init(codec.dec_b.size());

  TrainReport report;
  long gstep = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int step = 0; step < spe; ++step, ++gstep) {
      fill_sources(source_set, batch, n, rng, w.s);
      kt.gemm_nt(w.u.data(), w.s.data(), codec.enc_w.data(), batch, n, cd);
      for (int b = 0; b < batch; ++b) {
        double* row = w.u.data() + static_cast<std::size_t>(b) * cd;
        for (int j = 0; j < cd; ++j) row[j] += codec.enc_b[j];
        SignalBlock z(codec.antennas, codec.block_len);
        kt.scale(z.reals(), codec.gamma, row, cd);

        const ChannelRealization ch = fixed_channel != nullptr
                                          ? *fixed_channel
                                          : sample_rayleigh_channel(
                                                codec.antennas, rng);
        const double sigma_sq = snr_to_noise_power(
            draw_snr(snr_min_db, snr_max_db, rng), codec.antennas);
        const SignalBlock y = transmit(precode(z, ch), ch, sigma_sq, rng);
        const SignalBlock y_eq = equalize(y, ch);
        // Sampler in the loop, gradient-free: only the decoder sees it.
        const auto [z_hat, trace] =
            denoise(y_eq, ch, sigma_sq, model, sched, rng);
        std::memcpy(w.r.data() + static_cast<std::size_t>(b) * cd,
                    z_hat.reals(), cd * sizeof(double));
      }

      const double loss = decoder_pass(codec, batch, w);
      if (!std::isfinite(loss)) throw TrainingDiverged(gstep);
      epoch_loss += loss;

      const double lr =
          lr_at(gstep, total_steps, cfg.learning_rate, cfg.warmup_frac);
      adam_update(a_dec_w, codec.dec_w, w.g_dec_w, lr, gstep + 1);
      adam_update(a_dec_b, codec.dec_b, w.g_dec_b, lr, gstep + 1);
    }
    report.epoch_loss.push_back(epoch_loss / spe);
  }
  report.steps = gstep;
  return report;
}

double codec_mse(const ToyCodec& codec,
                 const std::vector<std::vector<double>>& sources,
                 double snr_db, const PredictorModel* dm,
                 const NoiseSchedule* sched, RngStream& rng,
                 const ChannelRealization* fixed_channel) {
  check_codec(codec);
  check_set(sources, codec.source_dim, "codec_mse");
  if (dm != nullptr && sched == nullptr) {
    throw std::invalid_argument("codec_mse: denoising needs a schedule");
  }
  const auto& kt = kernels::active();
  const double sigma_sq = snr_to_noise_power(snr_db, codec.antennas);
  double total = 0.0;
  for (const auto& s : sources) {
    const SignalBlock z = encode(codec, s);
    const ChannelRealization ch =
        fixed_channel != nullptr
            ? *fixed_channel
            : sample_rayleigh_channel(codec.antennas, rng);
    const SignalBlock y = transmit(precode(z, ch), ch, sigma_sq, rng);
    SignalBlock y_eq = equalize(y, ch);
    if (dm != nullptr) {
      y_eq = denoise(y_eq, ch, sigma_sq, *dm, *sched, rng).first;
    }
    const std::vector<double> s_hat = decode(codec, y_eq);
    total += kt.sum_sq_diff(s_hat.data(), s.data(), s_hat.size()) /
             codec.source_dim;
  }
  return total / sources.size();
}

void save_codec(const std::filesystem::path& path, const ToyCodec& codec,
                const SourceSpec& source) {
  check_codec(codec);
  Checkpoint ckpt;
  ckpt.kind = "toy_codec";
  ckpt.meta["source_dim"] = codec.source_dim;
  ckpt.meta["antennas"] = codec.antennas;
  ckpt.meta["block_len"] = codec.block_len;
  ckpt.meta["gamma"] = codec.gamma;
  ckpt.meta["cbr"] = codec.cbr();
  ckpt.meta["source"] = {
      {"dim", source.dim},
      {"cond", source.cond},
      {"kind", source.kind == SourceKind::gaussian ? "gaussian" : "mixture2"},
      {"seed", source.seed}};
  const std::size_t cd = codec.channel_dim();
  const std::size_t n = codec.source_dim;
  ckpt.arrays.push_back({"encoder.weight", {cd, n}, codec.enc_w});
  ckpt.arrays.push_back({"encoder.bias", {cd}, codec.enc_b});
  ckpt.arrays.push_back({"decoder.weight", {n, cd}, codec.dec_w});
  ckpt.arrays.push_back({"decoder.bias", {n}, codec.dec_b});
  save_checkpoint(path, ckpt);
}

std::pair<ToyCodec, SourceSpec> load_codec(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "toy_codec") {
    throw std::runtime_error(path.string() + " is not a codec checkpoint");
  }
  ToyCodec c;
  c.source_dim = ckpt.meta.at("source_dim").get<int>();
  c.antennas = ckpt.meta.at("antennas").get<int>();
  c.block_len = ckpt.meta.at("block_len").get<int>();
  c.gamma = ckpt.meta.at("gamma").get<double>();
  c.enc_w = find_array(ckpt, "encoder.weight").data;
  c.enc_b = find_array(ckpt, "encoder.bias").data;
  c.dec_w = find_array(ckpt, "decoder.weight").data;
  c.dec_b = find_array(ckpt, "decoder.bias").data;
  check_codec(c);

  SourceSpec spec;
  const auto& js = ckpt.meta.at("source");
  spec.dim = js.at("dim").get<int>();
  spec.cond = js.at("cond").get<double>();
  spec.seed = js.at("seed").get<std::uint64_t>();
  const std::string kind = js.at("kind").get<std::string>();
  if (kind == "gaussian") {
    spec.kind = SourceKind::gaussian;
  } else if (kind == "mixture2") {
    spec.kind = SourceKind::mixture2;
  } else {
    throw std::runtime_error("unknown source kind in checkpoint: " + kind);
  }
  if (spec.dim != c.source_dim) {
    throw std::runtime_error("codec checkpoint source dim mismatch");
  }
  return {std::move(c), spec};
}

}  // namespace dmlink
