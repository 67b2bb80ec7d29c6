// SPDX-License-Identifier: Apache-2.0
//
// dmlink: link-level simulation driver. Subcommands cover singular value
// statistics, equalized-vs-denoised MSE sweeps, the three training stages,
// end-to-end codec evaluation and a predictor gradient check.

#include <exception>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmlink/harness.hpp"
#include "dmlink/io_util.hpp"

namespace {

std::string error_line(const std::string& type, const std::string& message) {
  nlohmann::ordered_json doc;
  doc["error"]["type"] = type;
  doc["error"]["message"] = message;
  return doc.dump();
}

void add_schedule_options(CLI::App* sub, dmlink::ScheduleConfig& s) {
  sub->add_option("--steps", s.steps, "Diffusion schedule length");
  sub->add_option("--alpha-first", s.alpha_first, "Schedule alpha at t = 1");
  sub->add_option("--alpha-last", s.alpha_last, "Schedule alpha at t = T");
}

void add_predictor_option(CLI::App* sub, dmlink::PredictorSpec& p) {
  sub->add_option("--predictor", p.ref,
                  "'oracle' or a predictor checkpoint path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DM-assisted MIMO link simulation"};
  app.set_version_flag("--version", std::string(dmlink::kToolVersion));
  app.set_config("--config", "", "INI config file with [subcommand] sections");
  app.require_subcommand(1);

  dmlink::SvdStatsConfig svd;
  CLI::App* svd_cmd =
      app.add_subcommand("svd-stats", "Channel singular value statistics");
  svd_cmd->add_option("--antennas", svd.antennas, "Array size M");
  svd_cmd->add_option("--samples", svd.samples, "Channel draws");
  svd_cmd->add_option("--seed", svd.seed, "Master seed");
  svd_cmd->add_option("--hist-bins", svd.hist_bins, "Histogram bins");
  svd_cmd->add_option("--hist-max", svd.hist_max, "Histogram upper edge");
  svd_cmd->add_option("--out", svd.out, "JSON report path");
  svd_cmd->add_option("--hist-out", svd.hist_out, "Histogram CSV path");
  svd_cmd->callback([&] {
    const dmlink::SvdStatsReport rep = dmlink::run_svd_stats(svd);
    std::cout << "svd-stats: mean_lambda_sq first=" <<
        dmlink::fmt_double(rep.mean_lambda_sq.front()) << " last=" <<
        dmlink::fmt_double(rep.mean_lambda_sq.back()) << " gap_ratio_db=" <<
        dmlink::fmt_double(rep.gap_ratio_db) << "\n";
  });

  dmlink::MseSweepConfig sweep;
  CLI::App* sweep_cmd = app.add_subcommand(
      "mse-sweep", "Equalized vs denoised MSE across SNR");
  sweep_cmd->add_option("--antennas", sweep.antennas, "Array size M");
  sweep_cmd->add_option("--block-len", sweep.block_len, "Symbols per block");
  sweep_cmd->add_option("--snr", sweep.snr_db, "SNR grid in dB")
      ->delimiter(',');
  sweep_cmd->add_option("--trials", sweep.trials, "Trials per SNR");
  sweep_cmd->add_option("--seed", sweep.seed, "Master seed");
  add_schedule_options(sweep_cmd, sweep.schedule);
  add_predictor_option(sweep_cmd, sweep.predictor);
  sweep_cmd->add_option("--out", sweep.out, "Metrics CSV path");
  sweep_cmd->add_option("--trace-out", sweep.trace_out,
                        "Sampler trace CSV for the first trial");
  sweep_cmd->callback([&] {
    const auto rows = dmlink::run_mse_sweep(sweep);
    for (const dmlink::MetricRow& row : rows) {
      std::cout << "mse-sweep: snr_db=" << dmlink::fmt_double(row.snr_db)
                << " mse_eq_avg=" << dmlink::fmt_double(row.avg_eq)
                << " mse_dm_avg=" << dmlink::fmt_double(row.avg_dm) << "\n";
    }
  });

  dmlink::TrainingRunConfig train;
  const std::map<std::string, dmlink::SourceKind> kind_names{
      {"gaussian", dmlink::SourceKind::gaussian},
      {"mixture2", dmlink::SourceKind::mixture2}};
  CLI::App* train_cmd =
      app.add_subcommand("train", "Codec / predictor training stages");
  train_cmd->add_option("--stage", train.stage, "1: codec, 2: predictor, 3: decoder refit")
      ->required()
      ->check(CLI::Range(1, 3));
  train_cmd->add_option("--source-dim", train.source_dim, "Source dimension n");
  train_cmd->add_option("--antennas", train.antennas, "Array size M");
  train_cmd->add_option("--block-len", train.block_len, "Symbols per block k");
  train_cmd->add_option("--source-cond", train.source_cond,
                        "Source covariance condition number");
  train_cmd->add_option("--source-seed", train.source_seed,
                        "Source model seed");
  train_cmd->add_option("--source-kind", train.source_kind, "Source family")
      ->transform(CLI::CheckedTransformer(kind_names, CLI::ignore_case));
  train_cmd->add_option("--snr-min", train.snr_min, "Training SNR lower edge");
  train_cmd->add_option("--snr-max", train.snr_max, "Training SNR upper edge");
  train_cmd->add_option("--epochs", train.train.epochs, "Training epochs");
  train_cmd->add_option("--batch", train.train.batch_size, "Batch size");
  train_cmd->add_option("--lr", train.train.learning_rate, "Peak learning rate");
  train_cmd->add_option("--warmup-frac", train.train.warmup_frac,
                        "Warmup fraction of total steps");
  train_cmd->add_option("--steps-per-epoch", train.train.steps_per_epoch,
                        "Optimizer steps per epoch (0: derive from set size)");
  train_cmd->add_option("--hidden", train.hidden, "Hidden layer widths")
      ->delimiter(',');
  train_cmd->add_option("--train-set", train.train_set, "Training samples");
  train_cmd->add_option("--holdout-set", train.holdout_set, "Holdout samples");
  train_cmd->add_option("--seed", train.seed, "Master seed");
  add_schedule_options(train_cmd, train.schedule);
  train_cmd->add_option("--codec", train.codec_in,
                        "Input codec checkpoint (stages 2 and 3)");
  train_cmd->add_option("--predictor", train.predictor_in,
                        "Stage 3: 'oracle' or a predictor checkpoint path");
  train_cmd->add_option("--out", train.out, "Output checkpoint path")
      ->required();
  train_cmd->add_option("--loss-out", train.loss_out, "Per-epoch loss CSV");
  train_cmd->callback([&] {
    const dmlink::TrainingRunReport rep = dmlink::run_training(train);
    std::cout << "train: stage=" << train.stage << " final_loss="
              << dmlink::fmt_double(rep.epoch_loss.empty()
                                        ? 0.0
                                        : rep.epoch_loss.back())
              << " holdout=" << dmlink::fmt_double(rep.holdout) << "\n";
  });

  dmlink::E2eConfig e2e;
  CLI::App* e2e_cmd = app.add_subcommand(
      "e2e-eval", "Source reconstruction MSE for trained codecs");
  e2e_cmd->add_option("--codec1", e2e.codec_stage1, "Stage-1 codec checkpoint")
      ->required();
  e2e_cmd->add_option("--codec3", e2e.codec_stage3, "Stage-3 codec checkpoint")
      ->required();
  add_predictor_option(e2e_cmd, e2e.predictor);
  add_schedule_options(e2e_cmd, e2e.schedule);
  e2e_cmd->add_option("--snr", e2e.snr_db, "SNR grid in dB")->delimiter(',');
  e2e_cmd->add_option("--trials", e2e.trials, "Trials per SNR");
  e2e_cmd->add_option("--seed", e2e.seed, "Master seed");
  e2e_cmd->add_option("--out", e2e.out, "Metrics CSV path");
  e2e_cmd->callback([&] {
    const auto rows = dmlink::run_e2e(e2e);
    for (const dmlink::E2eRow& row : rows) {
      std::cout << "e2e-eval: snr_db=" << dmlink::fmt_double(row.snr_db)
                << " eq_dec1=" << dmlink::fmt_double(row.mse_eq_dec1)
                << " dm_dec1=" << dmlink::fmt_double(row.mse_dm_dec1)
                << " dm_dec3=" << dmlink::fmt_double(row.mse_dm_dec3) << "\n";
    }
  });

  dmlink::GradCheckConfig grad;
  CLI::App* grad_cmd = app.add_subcommand(
      "gradient-check", "Backprop vs finite differences");
  grad_cmd->add_option("--antennas", grad.antennas, "Array size M");
  grad_cmd->add_option("--block-len", grad.block_len, "Symbols per block");
  grad_cmd->add_option("--hidden", grad.hidden, "Hidden layer widths")
      ->delimiter(',');
  grad_cmd->add_option("--seed", grad.seed, "Master seed");
  grad_cmd->add_option("--out", grad.out, "JSON report path");
  grad_cmd->callback([&] {
    const dmlink::GradCheckReport rep = dmlink::run_gradient_check(grad);
    std::cout << "gradient-check: parameters=" << rep.parameters
              << " max_rel_err=" << dmlink::fmt_double(rep.max_rel_err)
              << "\n";
    if (rep.max_rel_err > 1e-4) {
      throw std::runtime_error("gradient check failed: max_rel_err above 1e-4");
    }
  });

  // Lets --config (a root option) appear after the subcommand name.
  for (CLI::App* sub : app.get_subcommands(
           [](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
    std::cerr << error_line("usage", e.what()) << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << error_line("runtime", e.what()) << std::endl;
    return 1;
  }
  return 0;
}
