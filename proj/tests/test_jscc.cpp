// SPDX-License-Identifier: Apache-2.0
//
// Codec checks. The two independent oracles here are a least-squares
// inversion of the encoder (decode must undo encode through a clean link)
// and the Gaussian Wiener filter (codec_mse must reproduce the closed-form
// MMSE when the decoder is set to it analytically).

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <vector>

#include <doctest.h>

#include "dmlink/channel.hpp"
#include "dmlink/jscc.hpp"
#include "dmlink/rng.hpp"
#include "dmlink/schedule.hpp"

using dmlink::ChannelRealization;
using dmlink::ComplexMatrix;
using dmlink::RngStream;
using dmlink::SourceKind;
using dmlink::SourceModel;
using dmlink::SourceSpec;
using dmlink::ToyCodec;
using dmlink::TrainConfig;

namespace {

SourceSpec small_spec() { return SourceSpec{8, 10.0, SourceKind::gaussian, 7}; }

// Source covariance implied by the model: basis * diag(scales^2) * basis^T.
Eigen::MatrixXd covariance_of(const SourceModel& m) {
  const int n = m.spec.dim;
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) b(i, j) = m.basis[static_cast<std::size_t>(i) * n + j];
  }
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = m.scales[i] * m.scales[i];
  return b * v.asDiagonal() * b.transpose();
}

bool codecs_identical(const ToyCodec& a, const ToyCodec& b) {
  return a.enc_w == b.enc_w && a.enc_b == b.enc_b && a.dec_w == b.dec_w &&
         a.dec_b == b.dec_b && a.gamma == b.gamma;
}

double mean_encoded_power(const ToyCodec& codec,
                          const std::vector<std::vector<double>>& batch) {
  double acc = 0.0;
  for (const auto& s : batch) {
    const auto z = dmlink::encode(codec, s);
    acc += z.frobenius_sq() / z.size();
  }
  return acc / batch.size();
}

}  // namespace

TEST_CASE("source model has an orthogonal basis and calibrated spread") {
  const SourceModel m = dmlink::make_source_model(small_spec());
  const int n = m.spec.dim;

  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) b(i, j) = m.basis[static_cast<std::size_t>(i) * n + j];
  }
  CHECK((b * b.transpose() - Eigen::MatrixXd::Identity(n, n)).norm() < 1e-12);

  double mean_var = 0.0;
  for (double s : m.scales) mean_var += s * s;
  mean_var /= n;
  CHECK(mean_var == doctest::Approx(1.0).epsilon(1e-12));
  const double ratio = (m.scales.front() * m.scales.front()) /
                       (m.scales.back() * m.scales.back());
  CHECK(ratio == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(m.offset.empty());

  // Sampled covariance matches basis * diag * basis^T.
  RngStream rng(801);
  const Eigen::MatrixXd c_want = covariance_of(m);
  Eigen::MatrixXd c_got = Eigen::MatrixXd::Zero(n, n);
  const int reps = 60000;
  for (int r = 0; r < reps; ++r) {
    const auto s = m.sample(rng);
    Eigen::Map<const Eigen::VectorXd> v(s.data(), n);
    c_got += v * v.transpose();
  }
  c_got /= reps;
  CHECK((c_got - c_want).norm() / c_want.norm() < 0.05);
}

TEST_CASE("mixture source splits power between offset and spread") {
  SourceSpec spec = small_spec();
  spec.kind = SourceKind::mixture2;
  const SourceModel m = dmlink::make_source_model(spec);
  const int n = m.spec.dim;
  REQUIRE(static_cast<int>(m.offset.size()) == n);

  double off_power = 0.0;
  for (double o : m.offset) off_power += o * o;
  double within = 0.0;
  for (double s : m.scales) within += s * s;
  // A quarter of the unit per-dimension power sits in the offset.
  CHECK(off_power / n == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(within / n == doctest::Approx(0.75).epsilon(1e-12));

  RngStream rng(802);
  double mean = 0.0, power = 0.0, dot_off = 0.0;
  const int reps = 40000;
  for (int r = 0; r < reps; ++r) {
    const auto s = m.sample(rng);
    for (int i = 0; i < n; ++i) {
      mean += s[i];
      power += s[i] * s[i];
      dot_off += s[i] * m.offset[i];
    }
  }
  CHECK(std::abs(mean / (static_cast<double>(reps) * n)) < 0.01);
  CHECK(power / (static_cast<double>(reps) * n) ==
        doctest::Approx(1.0).epsilon(0.02));
  // Mode signs are balanced, so the projection on the offset averages out.
  CHECK(std::abs(dot_off / (static_cast<double>(reps) * n)) < 0.01);
}

TEST_CASE("source sets are sized, shaped and seeded deterministically") {
  const SourceModel m = dmlink::make_source_model(small_spec());
  RngStream a(803), b(803), c(804);
  const auto set_a = dmlink::make_source_set(m, 10, a);
  const auto set_b = dmlink::make_source_set(m, 10, b);
  const auto set_c = dmlink::make_source_set(m, 10, c);
  REQUIRE(set_a.size() == 10);
  REQUIRE(set_a[0].size() == 8);
  CHECK(set_a == set_b);
  CHECK(set_a != set_c);
}

TEST_CASE("codec geometry and calibrated power") {
  RngStream rng(805);
  ToyCodec codec = dmlink::make_toy_codec(64, 2, 16, rng);
  CHECK(codec.channel_dim() == 64);
  CHECK(codec.cbr() == 0.25);

  const SourceModel m =
      dmlink::make_source_model(SourceSpec{64, 10.0, SourceKind::gaussian, 7});
  const auto batch = dmlink::make_reference_batch(m);
  dmlink::calibrate_power(codec, batch);
  CHECK(mean_encoded_power(codec, batch) == doctest::Approx(1.0).epsilon(1e-12));

  // gamma scales encode() linearly.
  const auto z1 = dmlink::encode(codec, batch[0]);
  codec.gamma *= 2.0;
  const auto z2 = dmlink::encode(codec, batch[0]);
  for (std::size_t i = 0; i < z1.real_count(); ++i) {
    CHECK(z2.reals()[i] == doctest::Approx(2.0 * z1.reals()[i]).epsilon(1e-15));
  }
}

TEST_CASE("decode inverts encode when set to the least-squares inverse") {
  RngStream rng(806);
  const int n = 8, m_ant = 2, k = 4, cd = 2 * m_ant * k;  // cd = 16 >= n
  ToyCodec codec = dmlink::make_toy_codec(n, m_ant, k, rng);
  codec.gamma = 0.731;

  // Solve dec (n x cd) so dec (gamma (enc s + b)) + dec_b = s for all s.
  Eigen::MatrixXd enc(cd, n);
  for (int i = 0; i < cd; ++i) {
    for (int j = 0; j < n; ++j) enc(i, j) = codec.enc_w[static_cast<std::size_t>(i) * n + j];
  }
  Eigen::VectorXd enc_b(cd);
  for (int i = 0; i < cd; ++i) enc_b(i) = codec.enc_b[i];

  const Eigen::MatrixXd dec =
      (codec.gamma * enc).completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::VectorXd dec_b = -dec * (codec.gamma * enc_b);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < cd; ++j) codec.dec_w[static_cast<std::size_t>(i) * cd + j] = dec(i, j);
    codec.dec_b[i] = dec_b(i);
  }

  const SourceModel src = dmlink::make_source_model(small_spec());
  RngStream srng(807);
  for (int r = 0; r < 20; ++r) {
    const auto s = src.sample(srng);
    const auto s_hat = dmlink::decode(codec, dmlink::encode(codec, s));
    for (int i = 0; i < n; ++i) {
      CHECK(s_hat[i] == doctest::Approx(s[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("codec_mse reproduces the closed-form wiener error") {
  // Identity encoder over an identity channel turns the link into
  // y = gamma s + noise, whose optimal affine decoder is explicit.
  RngStream rng(808);
  const int n = 16, m_ant = 2, k = 4;
  ToyCodec codec = dmlink::make_toy_codec(n, m_ant, k, rng);
  std::fill(codec.enc_w.begin(), codec.enc_w.end(), 0.0);
  std::fill(codec.enc_b.begin(), codec.enc_b.end(), 0.0);
  for (int i = 0; i < n; ++i) codec.enc_w[static_cast<std::size_t>(i) * n + i] = 1.0;

  const SourceModel src =
      dmlink::make_source_model(SourceSpec{16, 10.0, SourceKind::gaussian, 7});
  const auto batch = dmlink::make_reference_batch(src);
  dmlink::calibrate_power(codec, batch);

  const double snr_db = 10.0;
  const double sigma_sq = dmlink::snr_to_noise_power(snr_db, m_ant);
  const Eigen::MatrixXd c = covariance_of(src);
  const double g = codec.gamma;
  // Real-valued noise variance per dimension is half the complex power.
  const Eigen::MatrixXd a =
      g * g * c + 0.5 * sigma_sq * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd wiener = g * c * a.inverse();
  const double mse_opt =
      (c - g * wiener * c).trace() / n;

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      codec.dec_w[static_cast<std::size_t>(i) * n + j] = wiener(i, j);
    }
    codec.dec_b[i] = 0.0;
  }

  const ChannelRealization ch =
      dmlink::channel_from_matrix(ComplexMatrix::identity(m_ant));
  RngStream srng(809);
  const auto holdout = dmlink::make_source_set(src, 3000, srng);
  RngStream mc(810);
  const double mse =
      dmlink::codec_mse(codec, holdout, snr_db, nullptr, nullptr, mc, &ch);
  CHECK(mse == doctest::Approx(mse_opt).epsilon(0.05));
}

TEST_CASE("stage 1 drives a clean link to near-exact reconstruction") {
  RngStream rng(811);
  const int n = 8;
  ToyCodec codec = dmlink::make_toy_codec(n, 2, 4, rng);
  const SourceModel src = dmlink::make_source_model(small_spec());
  RngStream set_rng(812);
  const auto train_set = dmlink::make_source_set(src, 256, set_rng);
  const auto ref = dmlink::make_reference_batch(src);
  const ChannelRealization ch =
      dmlink::channel_from_matrix(ComplexMatrix::identity(2));

  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.batch_size = 64;
  cfg.learning_rate = 3e-3;
  RngStream train_rng(813);
  const auto rep = dmlink::stage1_train(codec, train_set, ref, 300.0, 300.0,
                                        cfg, train_rng, &ch);
  REQUIRE(rep.epoch_loss.size() == 500);
  CHECK(rep.epoch_loss.back() < rep.epoch_loss.front());
  CHECK(rep.epoch_loss.back() < 1e-4);  // source variance is 1 per dimension

  // The power constraint holds after the final recalibration.
  CHECK(mean_encoded_power(codec, ref) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stage 1 prefers high snr and improves over epochs") {
  RngStream rng(814);
  ToyCodec codec = dmlink::make_toy_codec(8, 2, 4, rng);
  const SourceModel src = dmlink::make_source_model(small_spec());
  RngStream set_rng(815);
  const auto train_set = dmlink::make_source_set(src, 512, set_rng);
  const auto ref = dmlink::make_reference_batch(src);

  TrainConfig cfg;
  cfg.epochs = 120;
  cfg.batch_size = 64;
  cfg.learning_rate = 2e-3;
  RngStream train_rng(816);
  const auto rep =
      dmlink::stage1_train(codec, train_set, ref, 0.0, 20.0, cfg, train_rng);
  CHECK(rep.epoch_loss.back() < 0.8 * rep.epoch_loss.front());

  RngStream hold_rng(817);
  const auto holdout = dmlink::make_source_set(src, 1500, hold_rng);
  RngStream mc1(818), mc2(818);
  const double mse_low =
      dmlink::codec_mse(codec, holdout, 0.0, nullptr, nullptr, mc1);
  const double mse_high =
      dmlink::codec_mse(codec, holdout, 20.0, nullptr, nullptr, mc2);
  CHECK(mse_high < mse_low);
}

TEST_CASE("stage 1 is reproducible from its seeds") {
  const SourceModel src = dmlink::make_source_model(small_spec());
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;

  auto run = [&] {
    RngStream rng(819);
    ToyCodec codec = dmlink::make_toy_codec(8, 2, 4, rng);
    RngStream set_rng(820);
    const auto set = dmlink::make_source_set(src, 128, set_rng);
    RngStream train_rng(821);
    dmlink::stage1_train(codec, set, dmlink::make_reference_batch(src), 0.0,
                         20.0, cfg, train_rng);
    return codec;
  };
  CHECK(codecs_identical(run(), run()));
}

TEST_CASE("stage 3 refits only the decoder") {
  RngStream rng(822);
  ToyCodec codec = dmlink::make_toy_codec(8, 2, 4, rng);
  const SourceModel src = dmlink::make_source_model(small_spec());
  RngStream set_rng(823);
  const auto train_set = dmlink::make_source_set(src, 128, set_rng);
  const auto ref = dmlink::make_reference_batch(src);

  TrainConfig warm;
  warm.epochs = 40;
  warm.batch_size = 32;
  warm.learning_rate = 2e-3;
  RngStream warm_rng(824);
  dmlink::stage1_train(codec, train_set, ref, 0.0, 20.0, warm, warm_rng);

  const auto sched = dmlink::build_linear_schedule(1000, 0.9999, 0.98);
  const auto oracle = dmlink::make_analytic_predictor();

  // Zero epochs: everything is untouched, bit for bit.
  ToyCodec zero = codec;
  TrainConfig none;
  none.epochs = 0;
  none.batch_size = 32;
  RngStream none_rng(825);
  const auto none_rep = dmlink::stage3_retrain(zero, oracle, sched, train_set,
                                               0.0, 10.0, none, none_rng);
  CHECK(none_rep.epoch_loss.empty());
  CHECK(codecs_identical(zero, codec));

  ToyCodec tuned = codec;
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  RngStream tune_rng(826);
  const auto rep = dmlink::stage3_retrain(tuned, oracle, sched, train_set, 0.0,
                                          10.0, cfg, tune_rng);
  REQUIRE(rep.epoch_loss.size() == 8);
  CHECK(tuned.enc_w == codec.enc_w);  // encoder and gamma stay frozen
  CHECK(tuned.enc_b == codec.enc_b);
  CHECK(tuned.gamma == codec.gamma);
  CHECK(tuned.dec_w != codec.dec_w);
}

TEST_CASE("codec checkpoints round-trip bit-exactly") {
  RngStream rng(827);
  ToyCodec codec = dmlink::make_toy_codec(8, 2, 4, rng);
  codec.gamma = 1.234567890123456;
  SourceSpec spec = small_spec();
  spec.kind = SourceKind::mixture2;

  const auto path =
      std::filesystem::temp_directory_path() / "dmlink_test_codec.json";
  dmlink::save_codec(path, codec, spec);
  const auto [back, back_spec] = dmlink::load_codec(path);
  std::filesystem::remove(path);

  CHECK(codecs_identical(back, codec));
  CHECK(back.source_dim == 8);
  CHECK(back.antennas == 2);
  CHECK(back.block_len == 4);
  CHECK(back_spec.dim == spec.dim);
  CHECK(back_spec.cond == spec.cond);
  CHECK(back_spec.kind == spec.kind);
  CHECK(back_spec.seed == spec.seed);
}
