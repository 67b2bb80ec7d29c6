// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "dmlink/complex_matrix.hpp"
#include "dmlink/rng.hpp"
#include "dmlink/schedule.hpp"

namespace dmlink {

enum class PredictorKind { analytic, feed_forward };

// Everything a noise predictor may condition on: the noisy block, the
// sub-channel gains, and the step (with its cumulative alpha, so the
// predictor itself does not need the schedule).
struct PredictorQuery {
  SignalBlock x_t;
  std::vector<double> lambdas;
  int t = 1;
  double alpha_bar_t = 1.0;
};

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;
};

// SiLU MLP; the last layer is linear.
struct FeedForwardNet {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const;
};

struct PredictorModel {
  PredictorKind kind = PredictorKind::analytic;
  // Analytic form: the prior signal power per complex element.
  double source_power = 1.0;
  // Feed-forward form: expected block shape, the schedule length the step
  // feature is normalized by, and the network.
  int antennas = 0;
  int block_len = 0;
  int schedule_steps = 0;
  FeedForwardNet net;
};

// Posterior-mean predictor for a Gaussian prior: eps_hat =
// sqrt(1 - abar) * x_t / (abar * source_power + 1 - abar).
PredictorModel make_analytic_predictor(double source_power = 1.0);

// Xavier-uniform weights, zero biases. Input layout per query:
// [x_t as interleaved reals, lambdas, t / schedule_steps, alpha_bar_t].
PredictorModel make_feed_forward_predictor(int antennas, int block_len,
                                           int schedule_steps,
                                           const std::vector<int>& hidden,
                                           RngStream& rng);

SignalBlock predict_epsilon(const PredictorModel& model,
                            const PredictorQuery& query);

struct TrainConfig {
  int epochs = 800;
  int batch_size = 128;
  double learning_rate = 1e-4;
  double warmup_frac = 0.05;
  std::uint64_t seed = 1;
  // 0 derives ceil(set size / batch size).
  int steps_per_epoch = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  long steps = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(long step);
  long step() const { return step_; }

 private:
  long step_;
};

// Denoising-loss training: per sample draw a block from the set, a uniform
// step, a fresh channel for the conditioning gains, and a forward-diffusion
// noise draw; regress the injected noise under squared error per complex
// element. cfg.seed is for callers that build `rng`; the function itself
// draws only from `rng`.
TrainReport train_predictor(PredictorModel& model,
                            const std::vector<SignalBlock>& encoded_set,
                            const NoiseSchedule& sched, const TrainConfig& cfg,
                            RngStream& rng);

// Monte Carlo estimate of that loss with uniform random steps.
double training_loss(const PredictorModel& model,
                     const std::vector<SignalBlock>& set,
                     const NoiseSchedule& sched, int samples, RngStream& rng);

// Holdout variant: steps cycle round-robin through the schedule.
double evaluate_loss(const PredictorModel& model,
                     const std::vector<SignalBlock>& set,
                     const NoiseSchedule& sched, int samples, RngStream& rng);

// Max relative error between backprop and central finite differences
// (h = 1e-5) of the single-sample loss, over every parameter.
double gradient_check(const PredictorModel& model, const PredictorQuery& query,
                      const SignalBlock& eps_target);

void save_predictor(const std::filesystem::path& path,
                    const PredictorModel& model);
PredictorModel load_predictor(const std::filesystem::path& path);

}  // namespace dmlink
