// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmlink/jscc.hpp"
#include "dmlink/predictor.hpp"
#include "dmlink/schedule.hpp"

namespace dmlink {

struct ScheduleConfig {
  int steps = 1000;
  double alpha_first = 0.9999;
  double alpha_last = 0.98;
};

NoiseSchedule make_schedule(const ScheduleConfig& cfg);

// "oracle" selects the analytic predictor; anything else is a checkpoint path.
struct PredictorSpec {
  std::string ref = "oracle";
  double oracle_power = 1.0;
};

PredictorModel resolve_predictor(const PredictorSpec& spec);

// ---- singular value statistics --------------------------------------------

struct SvdStatsConfig {
  int antennas = 2;
  long samples = 1000000;
  std::uint64_t seed = 1;
  int hist_bins = 120;
  double hist_max = 6.0;
  std::string out;       // JSON report path (empty: no file)
  std::string hist_out;  // singular value histogram CSV (empty: no file)
};

struct SvdStatsReport {
  std::vector<double> mean_lambda_sq;     // E[lambda_i^2]
  std::vector<double> mean_lambda_sq_db;  // E[10 log10 lambda_i^2]
  double trace_mean = 0.0;                // E[sum_i lambda_i^2]
  double gap_ratio_db = 0.0;              // 10 log10 of the mean ratio
  double gap_mean_db = 0.0;               // difference of mean-dB values
};

SvdStatsReport run_svd_stats(const SvdStatsConfig& cfg);

// ---- equalized vs denoised MSE sweep --------------------------------------

struct MseSweepConfig {
  int antennas = 2;
  int block_len = 16;
  std::vector<double> snr_db = {0, 5, 10, 15, 20};
  long trials = 1000;
  std::uint64_t seed = 1;
  ScheduleConfig schedule;
  PredictorSpec predictor;
  std::string out;        // CSV path (empty: no file)
  std::string trace_out;  // sampler trace of the first trial (empty: none)
};

struct MetricRow {
  double snr_db = 0.0;
  std::vector<double> mse_eq;  // per sub-channel, linear
  std::vector<double> mse_dm;
  double avg_eq = 0.0;
  double avg_dm = 0.0;
  long trials = 0;
  std::uint64_t seed = 0;
};

std::vector<MetricRow> run_mse_sweep(const MseSweepConfig& cfg);

// ---- codec training stages -------------------------------------------------

struct TrainingRunConfig {
  int stage = 1;
  int source_dim = 64;
  int antennas = 2;
  int block_len = 16;
  double source_cond = 10.0;
  std::uint64_t source_seed = 7;
  SourceKind source_kind = SourceKind::gaussian;
  double snr_min = 0.0;
  double snr_max = 20.0;
  TrainConfig train;
  ScheduleConfig schedule;
  std::vector<int> hidden = {256, 256, 256};  // stage-2 net
  int train_set = 8192;
  int holdout_set = 2048;
  std::uint64_t seed = 1;
  std::string codec_in;      // stages 2 and 3
  std::string predictor_in;  // stage 3 ("oracle" allowed)
  std::string out;           // checkpoint path
  std::string loss_out;      // per-epoch loss CSV (empty: no file)
};

struct TrainingRunReport {
  std::vector<double> epoch_loss;
  double holdout = 0.0;  // stage-dependent holdout metric
};

TrainingRunReport run_training(const TrainingRunConfig& cfg);

// ---- end-to-end codec evaluation -------------------------------------------

struct E2eConfig {
  std::string codec_stage1;
  std::string codec_stage3;
  PredictorSpec predictor;
  ScheduleConfig schedule;
  std::vector<double> snr_db = {0, 5, 10};
  long trials = 2000;
  std::uint64_t seed = 1;
  std::string out;  // CSV path (empty: no file)
};

struct E2eRow {
  double snr_db = 0.0;
  double mse_eq_dec1 = 0.0;  // stage-1 decoder on equalized blocks
  double mse_dm_dec1 = 0.0;  // stage-1 decoder on denoised blocks
  double mse_dm_dec3 = 0.0;  // stage-3 decoder on denoised blocks
  long trials = 0;
};

std::vector<E2eRow> run_e2e(const E2eConfig& cfg);

// ---- gradient check ---------------------------------------------------------

struct GradCheckConfig {
  int antennas = 2;
  int block_len = 4;
  std::vector<int> hidden = {72, 72, 72};
  std::uint64_t seed = 1;
  std::string out;  // JSON report path (empty: no file)
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t parameters = 0;
};

GradCheckReport run_gradient_check(const GradCheckConfig& cfg);

}  // namespace dmlink
