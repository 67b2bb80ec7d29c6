// SPDX-License-Identifier: Apache-2.0

#include "dmlink/harness.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dmlink/channel.hpp"
#include "dmlink/io_util.hpp"
#include "dmlink/kernels.hpp"
#include "dmlink/sampler.hpp"

namespace dmlink {
namespace {

constexpr double kReportedReferenceGapDb = 10.37;

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt_double(v[i]);
  }
  return out;
}

std::string join_int(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string schedule_digest(const ScheduleConfig& s) {
  return "steps=" + std::to_string(s.steps) +
         ";alpha_first=" + fmt_double(s.alpha_first) +
         ";alpha_last=" + fmt_double(s.alpha_last);
}

double to_db(double linear) { return 10.0 * std::log10(linear); }

void write_json_report(const std::string& path, nlohmann::ordered_json& doc,
                       const std::string& digest, std::uint64_t seed) {
  doc["tool"] = "dmlink";
  doc["version"] = kToolVersion;
  doc["config"] = digest;
  doc["seed"] = seed;
  if (!path.empty()) write_text_file(path, doc.dump(2) + "\n");
}

void write_trace_csv(const std::string& path, const SamplerTrace& trace,
                     const std::string& digest, std::uint64_t seed) {
  CsvWriter csv(path, digest, seed);
  csv.header({"t", "subchannel", "branch", "row_norm"});
  for (const SamplerTraceRow& r : trace.rows) {
    csv.row({std::to_string(r.t), std::to_string(r.subchannel + 1),
             r.branch == StepBranch::noise_add ? "noise_add" : "reverse",
             fmt_double(r.row_norm)});
  }
}

SignalBlock random_unit_block(int antennas, int block_len, RngStream& rng) {
  SignalBlock z(antennas, block_len);
  rng.fill_gaussian({z.reals(), z.real_count()}, std::sqrt(0.5));
  return z;
}

}  // namespace

NoiseSchedule make_schedule(const ScheduleConfig& cfg) {
  return build_linear_schedule(cfg.steps, cfg.alpha_first, cfg.alpha_last);
}

PredictorModel resolve_predictor(const PredictorSpec& spec) {
  if (spec.ref == "oracle") return make_analytic_predictor(spec.oracle_power);
  return load_predictor(spec.ref);
}

SvdStatsReport run_svd_stats(const SvdStatsConfig& cfg) {
  if (cfg.samples < 1) throw std::invalid_argument("svd-stats: samples < 1");
  if (cfg.hist_bins < 1 || !(cfg.hist_max > 0.0)) {
    throw std::invalid_argument("svd-stats: bad histogram parameters");
  }
  const std::string digest = hex64(fnv1a64(
      "svd-stats;antennas=" + std::to_string(cfg.antennas) +
      ";samples=" + std::to_string(cfg.samples) +
      ";seed=" + std::to_string(cfg.seed) +
      ";hist_bins=" + std::to_string(cfg.hist_bins) +
      ";hist_max=" + fmt_double(cfg.hist_max)));

  const int m = cfg.antennas;
  std::vector<double> sum_sq(m, 0.0), sum_db(m, 0.0);
  std::vector<std::vector<long>> hist(m, std::vector<long>(cfg.hist_bins, 0));
  std::vector<long> overflow(m, 0);
  const double bin_w = cfg.hist_max / cfg.hist_bins;

  RngStream rng = derive_stream(cfg.seed, "svd-stats", 0);
  for (long s = 0; s < cfg.samples; ++s) {
    const ChannelRealization ch = sample_rayleigh_channel(m, rng);
    for (int i = 0; i < m; ++i) {
      const double l2 = ch.lambda[i] * ch.lambda[i];
      sum_sq[i] += l2;
      sum_db[i] += to_db(l2);
      const int bin = static_cast<int>(ch.lambda[i] / bin_w);
      if (bin < cfg.hist_bins) {
        ++hist[i][bin];
      } else {
        ++overflow[i];
      }
    }
  }

  SvdStatsReport rep;
  rep.mean_lambda_sq.resize(m);
  rep.mean_lambda_sq_db.resize(m);
  for (int i = 0; i < m; ++i) {
    rep.mean_lambda_sq[i] = sum_sq[i] / cfg.samples;
    rep.mean_lambda_sq_db[i] = sum_db[i] / cfg.samples;
    rep.trace_mean += rep.mean_lambda_sq[i];
  }
  if (m > 1) {
    rep.gap_ratio_db = to_db(rep.mean_lambda_sq.front() /
                             rep.mean_lambda_sq.back());
    rep.gap_mean_db = rep.mean_lambda_sq_db.front() -
                      rep.mean_lambda_sq_db.back();
  }

  nlohmann::ordered_json doc;
  doc["antennas"] = m;
  doc["samples"] = cfg.samples;
  doc["mean_lambda_sq"] = rep.mean_lambda_sq;
  doc["mean_lambda_sq_db"] = rep.mean_lambda_sq_db;
  doc["trace_mean"] = rep.trace_mean;
  doc["gap_ratio_db"] = rep.gap_ratio_db;
  doc["gap_mean_db"] = rep.gap_mean_db;
  // Reference figure commonly quoted for this gap; reported, not asserted.
  doc["gap_mean_db_reference"] = kReportedReferenceGapDb;
  std::vector<double> overflow_frac(m);
  for (int i = 0; i < m; ++i) {
    overflow_frac[i] = static_cast<double>(overflow[i]) / cfg.samples;
  }
  doc["hist_overflow_frac"] = overflow_frac;
  write_json_report(cfg.out, doc, digest, cfg.seed);

  if (!cfg.hist_out.empty()) {
    CsvWriter csv(cfg.hist_out, digest, cfg.seed);
    std::vector<std::string> cols = {"bin_lo", "bin_hi"};
    for (int i = 0; i < m; ++i) {
      cols.push_back("density_" + std::to_string(i + 1));
    }
    csv.header(cols);
    for (int b = 0; b < cfg.hist_bins; ++b) {
      std::vector<double> row = {b * bin_w, (b + 1) * bin_w};
      for (int i = 0; i < m; ++i) {
        row.push_back(static_cast<double>(hist[i][b]) /
                      (static_cast<double>(cfg.samples) * bin_w));
      }
      csv.row_numeric(row);
    }
  }
  return rep;
}

std::vector<MetricRow> run_mse_sweep(const MseSweepConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("mse-sweep: trials < 1");
  if (cfg.snr_db.empty()) throw std::invalid_argument("mse-sweep: no SNRs");
  const std::string digest = hex64(fnv1a64(
      "mse-sweep;antennas=" + std::to_string(cfg.antennas) +
      ";block_len=" + std::to_string(cfg.block_len) + ";snr=" +
      join(cfg.snr_db) + ";trials=" + std::to_string(cfg.trials) +
      ";seed=" + std::to_string(cfg.seed) + ";" +
      schedule_digest(cfg.schedule) + ";predictor=" + cfg.predictor.ref));

  const NoiseSchedule sched = make_schedule(cfg.schedule);
  const PredictorModel model = resolve_predictor(cfg.predictor);
  const int m = cfg.antennas;

  std::vector<MetricRow> rows;
  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
    const double snr = cfg.snr_db[si];
    const double sigma_sq = snr_to_noise_power(snr, m);
    MetricRow row;
    row.snr_db = snr;
    row.mse_eq.assign(m, 0.0);
    row.mse_dm.assign(m, 0.0);
    row.trials = cfg.trials;
    row.seed = cfg.seed;

    const std::string tag = "mse-sweep/" + std::to_string(si);
    for (long j = 0; j < cfg.trials; ++j) {
      RngStream rng = derive_stream(cfg.seed, tag, j);
      const SignalBlock z = random_unit_block(m, cfg.block_len, rng);
      const ChannelRealization ch = sample_rayleigh_channel(m, rng);
      const SignalBlock y = transmit(precode(z, ch), ch, sigma_sq, rng);
      const SubchannelProfile profile = build_profile(ch, sigma_sq, sched);
      const SignalBlock y_eq = equalize_with_profile(y, ch, profile);
      const auto [z_hat, trace] = denoise(y_eq, ch, sigma_sq, model, sched, rng);
      for (int i = 0; i < m; ++i) {
        row.mse_eq[i] += row_mse(y_eq, z, i);
        row.mse_dm[i] += row_mse(z_hat, z, i);
      }
      if (si == 0 && j == 0 && !cfg.trace_out.empty()) {
        write_trace_csv(cfg.trace_out, trace, digest, cfg.seed);
      }
    }
    for (int i = 0; i < m; ++i) {
      row.mse_eq[i] /= cfg.trials;
      row.mse_dm[i] /= cfg.trials;
      row.avg_eq += row.mse_eq[i] / m;
      row.avg_dm += row.mse_dm[i] / m;
    }
    rows.push_back(std::move(row));
  }

  if (!cfg.out.empty()) {
    CsvWriter csv(cfg.out, digest, cfg.seed);
    std::vector<std::string> cols = {"snr_db"};
    const auto add_group = [&](const std::string& stem) {
      for (int i = 0; i < m; ++i) {
        cols.push_back(stem + "_" + std::to_string(i + 1));
      }
      cols.push_back(stem + "_avg");
    };
    add_group("mse_eq");
    add_group("mse_dm");
    add_group("mse_eq_db");
    add_group("mse_dm_db");
    cols.push_back("trials");
    cols.push_back("seed");
    csv.header(cols);
    for (const MetricRow& row : rows) {
      std::vector<std::string> cells = {fmt_double(row.snr_db)};
      for (int i = 0; i < m; ++i) cells.push_back(fmt_double(row.mse_eq[i]));
      cells.push_back(fmt_double(row.avg_eq));
      for (int i = 0; i < m; ++i) cells.push_back(fmt_double(row.mse_dm[i]));
      cells.push_back(fmt_double(row.avg_dm));
      for (int i = 0; i < m; ++i) {
        cells.push_back(fmt_double(to_db(row.mse_eq[i])));
      }
      cells.push_back(fmt_double(to_db(row.avg_eq)));
      for (int i = 0; i < m; ++i) {
        cells.push_back(fmt_double(to_db(row.mse_dm[i])));
      }
      cells.push_back(fmt_double(to_db(row.avg_dm)));
      cells.push_back(std::to_string(row.trials));
      cells.push_back(std::to_string(row.seed));
      csv.row(cells);
    }
  }
  return rows;
}

TrainingRunReport run_training(const TrainingRunConfig& cfg) {
  const std::string digest = hex64(fnv1a64(
      "train;stage=" + std::to_string(cfg.stage) +
      ";source_dim=" + std::to_string(cfg.source_dim) +
      ";antennas=" + std::to_string(cfg.antennas) +
      ";block_len=" + std::to_string(cfg.block_len) +
      ";source_cond=" + fmt_double(cfg.source_cond) +
      ";source_seed=" + std::to_string(cfg.source_seed) +
      ";source_kind=" +
      (cfg.source_kind == SourceKind::gaussian ? "gaussian" : "mixture2") +
      ";snr=" + fmt_double(cfg.snr_min) + ":" + fmt_double(cfg.snr_max) +
      ";epochs=" + std::to_string(cfg.train.epochs) +
      ";batch=" + std::to_string(cfg.train.batch_size) +
      ";lr=" + fmt_double(cfg.train.learning_rate) +
      ";warmup=" + fmt_double(cfg.train.warmup_frac) +
      ";steps_per_epoch=" + std::to_string(cfg.train.steps_per_epoch) +
      ";hidden=" + join_int(cfg.hidden) + ";" + schedule_digest(cfg.schedule) +
      ";train_set=" + std::to_string(cfg.train_set) +
      ";holdout_set=" + std::to_string(cfg.holdout_set) +
      ";seed=" + std::to_string(cfg.seed)));

  if (cfg.out.empty()) {
    throw std::invalid_argument("train: an output checkpoint path is required");
  }
  const NoiseSchedule sched = make_schedule(cfg.schedule);
  const double snr_mid = 0.5 * (cfg.snr_min + cfg.snr_max);

  TrainingRunReport rep;
  if (cfg.stage == 1) {
    const SourceSpec spec{cfg.source_dim, cfg.source_cond, cfg.source_kind,
                          cfg.source_seed};
    const SourceModel source = make_source_model(spec);
    RngStream set_rng = derive_stream(cfg.seed, "source-train", 0);
    const auto train_set = make_source_set(source, cfg.train_set, set_rng);
    const auto ref_batch = make_reference_batch(source);

    RngStream init_rng = derive_stream(cfg.seed, "codec-init", 0);
    ToyCodec codec = make_toy_codec(cfg.source_dim, cfg.antennas,
                                    cfg.block_len, init_rng);
    RngStream train_rng = derive_stream(cfg.seed, "stage1", 0);
    const TrainReport tr = stage1_train(codec, train_set, ref_batch,
                                        cfg.snr_min, cfg.snr_max, cfg.train,
                                        train_rng);
    rep.epoch_loss = tr.epoch_loss;

    RngStream hold_rng = derive_stream(cfg.seed, "source-holdout", 0);
    const auto holdout = make_source_set(source, cfg.holdout_set, hold_rng);
    RngStream eval_rng = derive_stream(cfg.seed, "holdout-eval", 0);
    rep.holdout = codec_mse(codec, holdout, snr_mid, nullptr, nullptr,
                            eval_rng);
    save_codec(cfg.out, codec, spec);
  } else if (cfg.stage == 2) {
    if (cfg.codec_in.empty()) {
      throw std::invalid_argument("train --stage 2 needs --codec");
    }
    const auto [codec, spec] = load_codec(cfg.codec_in);
    const SourceModel source = make_source_model(spec);

    RngStream set_rng = derive_stream(cfg.seed, "source-train", 0);
    const auto train_src = make_source_set(source, cfg.train_set, set_rng);
    std::vector<SignalBlock> train_set;
    train_set.reserve(train_src.size());
    for (const auto& s : train_src) train_set.push_back(encode(codec, s));

    RngStream init_rng = derive_stream(cfg.seed, "net-init", 0);
    PredictorModel model = make_feed_forward_predictor(
        codec.antennas, codec.block_len, sched.steps(), cfg.hidden, init_rng);
    RngStream train_rng = derive_stream(cfg.seed, "stage2", 0);
    const TrainReport tr =
        train_predictor(model, train_set, sched, cfg.train, train_rng);
    rep.epoch_loss = tr.epoch_loss;

    RngStream hold_rng = derive_stream(cfg.seed, "source-holdout", 0);
    const auto hold_src = make_source_set(source, cfg.holdout_set, hold_rng);
    std::vector<SignalBlock> hold_set;
    hold_set.reserve(hold_src.size());
    for (const auto& s : hold_src) hold_set.push_back(encode(codec, s));
    RngStream eval_rng = derive_stream(cfg.seed, "holdout-eval", 0);
    rep.holdout = evaluate_loss(model, hold_set, sched,
                                static_cast<int>(hold_set.size()), eval_rng);
    save_predictor(cfg.out, model);
  } else if (cfg.stage == 3) {
    if (cfg.codec_in.empty()) {
      throw std::invalid_argument("train --stage 3 needs --codec");
    }
    if (cfg.predictor_in.empty()) {
      throw std::invalid_argument(
          "train --stage 3 needs --predictor (path or 'oracle')");
    }
    auto [codec, spec] = load_codec(cfg.codec_in);
    const PredictorModel model =
        resolve_predictor(PredictorSpec{cfg.predictor_in, 1.0});
    if (model.kind == PredictorKind::feed_forward &&
        (model.antennas != codec.antennas ||
         model.block_len != codec.block_len ||
         model.schedule_steps != sched.steps())) {
      throw std::invalid_argument(
          "train --stage 3: predictor does not match the codec or schedule");
    }
    const SourceModel source = make_source_model(spec);
    RngStream set_rng = derive_stream(cfg.seed, "source-train", 0);
    const auto train_set = make_source_set(source, cfg.train_set, set_rng);

    RngStream train_rng = derive_stream(cfg.seed, "stage3", 0);
    const TrainReport tr =
        stage3_retrain(codec, model, sched, train_set, cfg.snr_min,
                       cfg.snr_max, cfg.train, train_rng);
    rep.epoch_loss = tr.epoch_loss;

    RngStream hold_rng = derive_stream(cfg.seed, "source-holdout", 0);
    const auto holdout = make_source_set(source, cfg.holdout_set, hold_rng);
    RngStream eval_rng = derive_stream(cfg.seed, "holdout-eval", 0);
    rep.holdout = codec_mse(codec, holdout, snr_mid, &model, &sched, eval_rng);
    save_codec(cfg.out, codec, spec);
  } else {
    throw std::invalid_argument("train: stage must be 1, 2 or 3");
  }

  if (!cfg.loss_out.empty()) {
    CsvWriter csv(cfg.loss_out, digest, cfg.seed);
    csv.header({"epoch", "loss"});
    for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e) {
      csv.row({std::to_string(e + 1), fmt_double(rep.epoch_loss[e])});
    }
  }
  return rep;
}

std::vector<E2eRow> run_e2e(const E2eConfig& cfg) {
  if (cfg.codec_stage1.empty() || cfg.codec_stage3.empty()) {
    throw std::invalid_argument("e2e-eval needs both codec checkpoints");
  }
  if (cfg.trials < 1) throw std::invalid_argument("e2e-eval: trials < 1");
  const std::string digest = hex64(fnv1a64(
      "e2e;snr=" + join(cfg.snr_db) + ";trials=" + std::to_string(cfg.trials) +
      ";seed=" + std::to_string(cfg.seed) + ";" +
      schedule_digest(cfg.schedule) + ";predictor=" + cfg.predictor.ref));

  const auto [codec1, spec1] = load_codec(cfg.codec_stage1);
  const auto [codec3, spec3] = load_codec(cfg.codec_stage3);
  if (codec1.source_dim != codec3.source_dim ||
      codec1.antennas != codec3.antennas ||
      codec1.block_len != codec3.block_len) {
    throw std::invalid_argument("e2e-eval: codec shapes do not match");
  }
  const NoiseSchedule sched = make_schedule(cfg.schedule);
  const PredictorModel model = resolve_predictor(cfg.predictor);
  const SourceModel source = make_source_model(spec1);
  const auto& kt = kernels::active();
  const int n = codec1.source_dim;
  // Stage 3 freezes the encoder, so the two codecs usually share it; then
  // one transmission serves both decoders and the comparison is paired.
  const bool shared_encoder = codec1.enc_w == codec3.enc_w &&
                              codec1.enc_b == codec3.enc_b &&
                              codec1.gamma == codec3.gamma;

  std::vector<E2eRow> rows;
  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
    const double snr = cfg.snr_db[si];
    const double sigma_sq = snr_to_noise_power(snr, codec1.antennas);
    E2eRow row;
    row.snr_db = snr;
    row.trials = cfg.trials;

    const std::string tag = "e2e/" + std::to_string(si);
    for (long j = 0; j < cfg.trials; ++j) {
      RngStream rng = derive_stream(cfg.seed, tag, j);
      const std::vector<double> s = source.sample(rng);
      const ChannelRealization ch =
          sample_rayleigh_channel(codec1.antennas, rng);

      const SignalBlock z1 = encode(codec1, s);
      const SignalBlock y1 = transmit(precode(z1, ch), ch, sigma_sq, rng);
      const SignalBlock y_eq1 = equalize(y1, ch);
      const auto [z_hat1, tr1] = denoise(y_eq1, ch, sigma_sq, model, sched, rng);

      const auto mse_of = [&](const ToyCodec& c, const SignalBlock& block) {
        const std::vector<double> s_hat = decode(c, block);
        return kt.sum_sq_diff(s_hat.data(), s.data(), s_hat.size()) / n;
      };
      row.mse_eq_dec1 += mse_of(codec1, y_eq1);
      row.mse_dm_dec1 += mse_of(codec1, z_hat1);
      if (shared_encoder) {
        row.mse_dm_dec3 += mse_of(codec3, z_hat1);
      } else {
        const SignalBlock z3 = encode(codec3, s);
        const SignalBlock y3 = transmit(precode(z3, ch), ch, sigma_sq, rng);
        const SignalBlock y_eq3 = equalize(y3, ch);
        const auto [z_hat3, tr3] =
            denoise(y_eq3, ch, sigma_sq, model, sched, rng);
        row.mse_dm_dec3 += mse_of(codec3, z_hat3);
      }
    }
    row.mse_eq_dec1 /= cfg.trials;
    row.mse_dm_dec1 /= cfg.trials;
    row.mse_dm_dec3 /= cfg.trials;
    rows.push_back(row);
  }

  if (!cfg.out.empty()) {
    CsvWriter csv(cfg.out, digest, cfg.seed);
    csv.header({"snr_db", "mse_eq_dec1", "mse_dm_dec1", "mse_dm_dec3",
                "trials", "seed"});
    for (const E2eRow& row : rows) {
      csv.row({fmt_double(row.snr_db), fmt_double(row.mse_eq_dec1),
               fmt_double(row.mse_dm_dec1), fmt_double(row.mse_dm_dec3),
               std::to_string(row.trials), std::to_string(cfg.seed)});
    }
  }
  return rows;
}

GradCheckReport run_gradient_check(const GradCheckConfig& cfg) {
  const std::string digest = hex64(fnv1a64(
      "grad-check;antennas=" + std::to_string(cfg.antennas) +
      ";block_len=" + std::to_string(cfg.block_len) +
      ";hidden=" + join_int(cfg.hidden) +
      ";seed=" + std::to_string(cfg.seed)));

  const NoiseSchedule sched = make_schedule(ScheduleConfig{});
  RngStream rng = derive_stream(cfg.seed, "grad-check", 0);
  PredictorModel model = make_feed_forward_predictor(
      cfg.antennas, cfg.block_len, sched.steps(), cfg.hidden, rng);

  const int t = 1 + static_cast<int>(rng.uniform_index(sched.steps()));
  ChannelRealization ch = sample_rayleigh_channel(cfg.antennas, rng);
  PredictorQuery q{random_unit_block(cfg.antennas, cfg.block_len, rng),
                   std::move(ch.lambda), t, sched.alpha_bar(t)};
  const SignalBlock target = random_unit_block(cfg.antennas, cfg.block_len, rng);

  GradCheckReport rep;
  rep.max_rel_err = gradient_check(model, q, target);
  rep.parameters = model.net.parameter_count();

  nlohmann::ordered_json doc;
  doc["antennas"] = cfg.antennas;
  doc["block_len"] = cfg.block_len;
  doc["hidden"] = cfg.hidden;
  doc["parameters"] = rep.parameters;
  doc["max_rel_err"] = rep.max_rel_err;
  doc["threshold"] = 1e-4;
  doc["pass"] = rep.max_rel_err <= 1e-4;
  write_json_report(cfg.out, doc, digest, cfg.seed);
  return rep;
}

}  // namespace dmlink
