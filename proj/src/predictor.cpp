// SPDX-License-Identifier: Apache-2.0

#include "dmlink/predictor.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "dmlink/channel.hpp"
#include "dmlink/checkpoint.hpp"
#include "dmlink/kernels.hpp"
#include "dmlink/optim.hpp"

namespace dmlink {
namespace {

int query_input_dim(int antennas, int block_len) {
  return 2 * antennas * block_len + antennas + 2;
}

double silu(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return x * s;
}

double silu_prime(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

// Batched activations for one forward/backward pass. acts[0] is the input
// batch, acts[l + 1] the output of layer l; pre[l] holds pre-activations and
// delta[l] the loss gradient with respect to them.
struct Workspace {
  int batch = 0;
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> delta;

  void resize(const FeedForwardNet& net, int b) {
    batch = b;
    const std::size_t nl = net.layers.size();
    acts.resize(nl + 1);
    pre.resize(nl);
    delta.resize(nl);
    acts[0].resize(static_cast<std::size_t>(b) * net.input_dim);
    for (std::size_t l = 0; l < nl; ++l) {
      const std::size_t width = static_cast<std::size_t>(b) * net.layers[l].out;
      pre[l].resize(width);
      delta[l].resize(width);
      acts[l + 1].resize(width);
    }
  }
};

void forward(const FeedForwardNet& net, Workspace& ws) {
  const auto& kt = kernels::active();
  const std::size_t nl = net.layers.size();
  for (std::size_t l = 0; l < nl; ++l) {
    const DenseLayer& layer = net.layers[l];
    kt.gemm_nt(ws.pre[l].data(), ws.acts[l].data(), layer.w.data(), ws.batch,
               layer.in, layer.out);
    for (int b = 0; b < ws.batch; ++b) {
      double* row = ws.pre[l].data() + static_cast<std::size_t>(b) * layer.out;
      for (int j = 0; j < layer.out; ++j) row[j] += layer.b[j];
    }
    const bool last = (l + 1 == nl);
    if (last) {
      ws.acts[l + 1] = ws.pre[l];
    } else {
      for (std::size_t i = 0; i < ws.pre[l].size(); ++i) {
        ws.acts[l + 1][i] = silu(ws.pre[l][i]);
      }
    }
  }
}

std::vector<DenseLayer> make_grads(const FeedForwardNet& net) {
  std::vector<DenseLayer> grads(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    grads[l].in = net.layers[l].in;
    grads[l].out = net.layers[l].out;
    grads[l].w.assign(net.layers[l].w.size(), 0.0);
    grads[l].b.assign(net.layers[l].b.size(), 0.0);
  }
  return grads;
}

// Expects ws.delta.back() to hold the loss gradient w.r.t. the output.
void backward(const FeedForwardNet& net, Workspace& ws,
              std::vector<DenseLayer>& grads) {
  const auto& kt = kernels::active();
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const DenseLayer& layer = net.layers[l];
    kt.gemm_tn(grads[l].w.data(), ws.delta[l].data(), ws.acts[l].data(),
               ws.batch, layer.out, layer.in);
    std::fill(grads[l].b.begin(), grads[l].b.end(), 0.0);
    for (int b = 0; b < ws.batch; ++b) {
      const double* row =
          ws.delta[l].data() + static_cast<std::size_t>(b) * layer.out;
      for (int j = 0; j < layer.out; ++j) grads[l].b[j] += row[j];
    }
    if (l > 0) {
      kt.gemm_nn(ws.delta[l - 1].data(), ws.delta[l].data(), layer.w.data(),
                 ws.batch, layer.out, layer.in);
      for (std::size_t i = 0; i < ws.delta[l - 1].size(); ++i) {
        ws.delta[l - 1][i] *= silu_prime(ws.pre[l - 1][i]);
      }
    }
  }
}

void fill_input_row(double* row, const PredictorModel& model,
                    const SignalBlock& x_t, const std::vector<double>& lambdas,
                    int t, double alpha_bar_t) {
  const int nx = 2 * model.antennas * model.block_len;
  std::memcpy(row, x_t.reals(), nx * sizeof(double));
  for (int i = 0; i < model.antennas; ++i) row[nx + i] = lambdas[i];
  row[nx + model.antennas] =
      static_cast<double>(t) / static_cast<double>(model.schedule_steps);
  row[nx + model.antennas + 1] = alpha_bar_t;
}

void check_query(const PredictorModel& model, const PredictorQuery& q) {
  if (q.t < 1) throw std::invalid_argument("predictor query: t must be >= 1");
  if (!(q.alpha_bar_t > 0.0) || q.alpha_bar_t > 1.0) {
    throw std::invalid_argument("predictor query: alpha_bar_t outside (0, 1]");
  }
  if (model.kind == PredictorKind::feed_forward) {
    if (q.x_t.rows() != model.antennas || q.x_t.cols() != model.block_len) {
      throw std::invalid_argument("predictor query: block shape mismatch");
    }
    if (static_cast<int>(q.lambdas.size()) != model.antennas) {
      throw std::invalid_argument("predictor query: lambda count mismatch");
    }
    if (q.t > model.schedule_steps) {
      throw std::invalid_argument("predictor query: t beyond schedule");
    }
  }
}

// One Algorithm-style training draw shared by the loss estimators.
struct LossSample {
  PredictorQuery query;
  SignalBlock eps;
};

LossSample draw_loss_sample(const std::vector<SignalBlock>& set, int t,
                            const NoiseSchedule& sched, RngStream& rng) {
  const SignalBlock& z = set[rng.uniform_index(set.size())];
  ChannelRealization ch = sample_rayleigh_channel(z.rows(), rng);
  DiffusionDraw d = forward_diffuse(z, t, sched, rng);
  LossSample s{PredictorQuery{std::move(d.x_t), std::move(ch.lambda), t,
                              sched.alpha_bar(t)},
               std::move(d.eps)};
  return s;
}

double mean_loss(const PredictorModel& model,
                 const std::vector<SignalBlock>& set,
                 const NoiseSchedule& sched, int samples, RngStream& rng,
                 bool round_robin) {
  if (set.empty()) throw std::invalid_argument("loss: empty signal set");
  if (samples < 1) throw std::invalid_argument("loss: samples must be >= 1");
  const auto& kt = kernels::active();
  double total = 0.0;
  for (int i = 0; i < samples; ++i) {
    const int t = round_robin
                      ? 1 + i % sched.steps()
                      : 1 + static_cast<int>(rng.uniform_index(sched.steps()));
    const LossSample s = draw_loss_sample(set, t, sched, rng);
    const SignalBlock pred = predict_epsilon(model, s.query);
    total += kt.sum_sq_diff(pred.reals(), s.eps.reals(), pred.real_count()) /
             static_cast<double>(pred.size());
  }
  return total / samples;
}

}  // namespace

std::size_t FeedForwardNet::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += l.w.size() + l.b.size();
  return n;
}

TrainingDiverged::TrainingDiverged(long step)
    : std::runtime_error("training loss became non-finite at step " +
                         std::to_string(step)),
      step_(step) {}

PredictorModel make_analytic_predictor(double source_power) {
  if (!(source_power > 0.0)) {
    throw std::invalid_argument("source_power must be positive");
  }
  PredictorModel m;
  m.kind = PredictorKind::analytic;
  m.source_power = source_power;
  return m;
}

PredictorModel make_feed_forward_predictor(int antennas, int block_len,
                                           int schedule_steps,
                                           const std::vector<int>& hidden,
                                           RngStream& rng) {
  if (antennas < 1 || block_len < 1 || schedule_steps < 1) {
    throw std::invalid_argument("predictor dimensions must be positive");
  }
  PredictorModel m;
  m.kind = PredictorKind::feed_forward;
  m.antennas = antennas;
  m.block_len = block_len;
  m.schedule_steps = schedule_steps;
  m.net.input_dim = query_input_dim(antennas, block_len);
  m.net.output_dim = 2 * antennas * block_len;

  int in = m.net.input_dim;
  std::vector<int> outs(hidden);
  outs.push_back(m.net.output_dim);
  for (const int out : outs) {
    if (out < 1) throw std::invalid_argument("layer width must be positive");
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    layer.w.resize(static_cast<std::size_t>(in) * out);
    layer.b.assign(out, 0.0);
    const double limit = std::sqrt(6.0 / (in + out));
    for (double& w : layer.w) w = limit * (2.0 * rng.uniform() - 1.0);
    m.net.layers.push_back(std::move(layer));
    in = out;
  }
  return m;
}

SignalBlock predict_epsilon(const PredictorModel& model,
                            const PredictorQuery& query) {
  check_query(model, query);
  if (model.kind == PredictorKind::analytic) {
    const double abar = query.alpha_bar_t;
    const double c = std::sqrt(1.0 - abar) /
                     (abar * model.source_power + (1.0 - abar));
    SignalBlock out(query.x_t.rows(), query.x_t.cols());
    kernels::active().scale(out.reals(), c, query.x_t.reals(),
                            out.real_count());
    return out;
  }

  thread_local Workspace ws;
  ws.resize(model.net, 1);
  fill_input_row(ws.acts[0].data(), model, query.x_t, query.lambdas, query.t,
                 query.alpha_bar_t);
  forward(model.net, ws);
  SignalBlock out(model.antennas, model.block_len);
  std::memcpy(out.reals(), ws.acts.back().data(),
              out.real_count() * sizeof(double));
  return out;
}

TrainReport train_predictor(PredictorModel& model,
                            const std::vector<SignalBlock>& encoded_set,
                            const NoiseSchedule& sched, const TrainConfig& cfg,
                            RngStream& rng) {
  if (model.kind != PredictorKind::feed_forward) {
    throw std::invalid_argument("train_predictor needs a feed-forward model");
  }
  if (encoded_set.empty()) {
    throw std::invalid_argument("train_predictor: empty signal set");
  }
  for (const SignalBlock& z : encoded_set) {
    if (z.rows() != model.antennas || z.cols() != model.block_len) {
      throw std::invalid_argument("train_predictor: block shape mismatch");
    }
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw std::invalid_argument("train_predictor: bad epochs or batch size");
  }
  if (sched.steps() != model.schedule_steps) {
    throw std::invalid_argument(
        "train_predictor: schedule length differs from the model's");
  }

  const auto& kt = kernels::active();
  const int batch = cfg.batch_size;
  const int spe = cfg.steps_per_epoch > 0
                      ? cfg.steps_per_epoch
                      : static_cast<int>((encoded_set.size() + batch - 1) /
                                         batch);
  const long total_steps = static_cast<long>(cfg.epochs) * spe;
  const int out_dim = model.net.output_dim;
  const double norm = static_cast<double>(batch) *
                      (model.antennas * model.block_len);

  Workspace ws;
  ws.resize(model.net, batch);
  std::vector<DenseLayer> grads = make_grads(model.net);
  std::vector<double> target(static_cast<std::size_t>(batch) * out_dim);

  std::vector<AdamSlot> slot_w(model.net.layers.size());
  std::vector<AdamSlot> slot_b(model.net.layers.size());
  for (std::size_t l = 0; l < model.net.layers.size(); ++l) {
    slot_w[l].init(model.net.layers[l].w.size());
    slot_b[l].init(model.net.layers[l].b.size());
  }

  TrainReport report;
  long gstep = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int step = 0; step < spe; ++step, ++gstep) {
      for (int b = 0; b < batch; ++b) {
        const int t = 1 + static_cast<int>(rng.uniform_index(sched.steps()));
        const LossSample s = draw_loss_sample(encoded_set, t, sched, rng);
        fill_input_row(
            ws.acts[0].data() +
                static_cast<std::size_t>(b) * model.net.input_dim,
            model, s.query.x_t, s.query.lambdas, t, s.query.alpha_bar_t);
        std::memcpy(target.data() + static_cast<std::size_t>(b) * out_dim,
                    s.eps.reals(), out_dim * sizeof(double));
      }
      forward(model.net, ws);

      const std::vector<double>& out = ws.acts.back();
      const double loss =
          kt.sum_sq_diff(out.data(), target.data(), out.size()) / norm;
      if (!std::isfinite(loss)) throw TrainingDiverged(gstep);
      epoch_loss += loss;

      std::vector<double>& dout = ws.delta.back();
      kt.axpby(dout.data(), 2.0 / norm, out.data(), -2.0 / norm, target.data(),
               out.size());
      backward(model.net, ws, grads);

      const double lr =
          lr_at(gstep, total_steps, cfg.learning_rate, cfg.warmup_frac);
      for (std::size_t l = 0; l < model.net.layers.size(); ++l) {
        adam_update(slot_w[l], model.net.layers[l].w, grads[l].w, lr,
                    gstep + 1);
        adam_update(slot_b[l], model.net.layers[l].b, grads[l].b, lr,
                    gstep + 1);
      }
    }
    report.epoch_loss.push_back(epoch_loss / spe);
  }
  report.steps = gstep;
  return report;
}

double training_loss(const PredictorModel& model,
                     const std::vector<SignalBlock>& set,
                     const NoiseSchedule& sched, int samples, RngStream& rng) {
  return mean_loss(model, set, sched, samples, rng, /*round_robin=*/false);
}

double evaluate_loss(const PredictorModel& model,
                     const std::vector<SignalBlock>& set,
                     const NoiseSchedule& sched, int samples, RngStream& rng) {
  return mean_loss(model, set, sched, samples, rng, /*round_robin=*/true);
}

double gradient_check(const PredictorModel& model, const PredictorQuery& query,
                      const SignalBlock& eps_target) {
  if (model.kind != PredictorKind::feed_forward) {
    throw std::invalid_argument("gradient_check needs a feed-forward model");
  }
  check_query(model, query);
  if (eps_target.rows() != model.antennas ||
      eps_target.cols() != model.block_len) {
    throw std::invalid_argument("gradient_check: target shape mismatch");
  }

  const auto& kt = kernels::active();
  const double norm = model.antennas * model.block_len;
  PredictorModel probe = model;

  Workspace ws;
  const auto loss_of = [&](const FeedForwardNet& net) {
    ws.resize(net, 1);
    fill_input_row(ws.acts[0].data(), probe, query.x_t, query.lambdas, query.t,
                   query.alpha_bar_t);
    forward(net, ws);
    return kt.sum_sq_diff(ws.acts.back().data(), eps_target.reals(),
                          ws.acts.back().size()) /
           norm;
  };

  // Backprop gradient at the unperturbed point.
  loss_of(probe.net);
  std::vector<DenseLayer> grads = make_grads(probe.net);
  kt.axpby(ws.delta.back().data(), 2.0 / norm, ws.acts.back().data(),
           -2.0 / norm, eps_target.reals(), ws.delta.back().size());
  backward(probe.net, ws, grads);

  const double h = 1e-5;
  double max_rel = 0.0;
  for (std::size_t l = 0; l < probe.net.layers.size(); ++l) {
    for (int part = 0; part < 2; ++part) {
      std::vector<double>& params =
          part == 0 ? probe.net.layers[l].w : probe.net.layers[l].b;
      const std::vector<double>& analytic =
          part == 0 ? grads[l].w : grads[l].b;
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = params[i];
        params[i] = orig + h;
        const double lp = loss_of(probe.net);
        params[i] = orig - h;
        const double lm = loss_of(probe.net);
        params[i] = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        const double denom =
            std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
        max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
      }
    }
  }
  return max_rel;
}

void save_predictor(const std::filesystem::path& path,
                    const PredictorModel& model) {
  Checkpoint ckpt;
  ckpt.kind = "predictor";
  ckpt.meta["predictor"] =
      model.kind == PredictorKind::analytic ? "analytic" : "feed_forward";
  ckpt.meta["source_power"] = model.source_power;
  if (model.kind == PredictorKind::feed_forward) {
    ckpt.meta["antennas"] = model.antennas;
    ckpt.meta["block_len"] = model.block_len;
    ckpt.meta["schedule_steps"] = model.schedule_steps;
    ckpt.meta["activation"] = "silu";
    std::vector<int> hidden;
    for (std::size_t l = 0; l + 1 < model.net.layers.size(); ++l) {
      hidden.push_back(model.net.layers[l].out);
    }
    ckpt.meta["hidden"] = hidden;
    for (std::size_t l = 0; l < model.net.layers.size(); ++l) {
      const DenseLayer& layer = model.net.layers[l];
      const std::string stem = "layer" + std::to_string(l);
      ckpt.arrays.push_back(
          {stem + ".weight",
           {static_cast<std::size_t>(layer.out),
            static_cast<std::size_t>(layer.in)},
           layer.w});
      ckpt.arrays.push_back(
          {stem + ".bias", {static_cast<std::size_t>(layer.out)}, layer.b});
    }
  }
  save_checkpoint(path, ckpt);
}

PredictorModel load_predictor(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "predictor") {
    throw std::runtime_error(path.string() + " is not a predictor checkpoint");
  }
  const std::string pk = ckpt.meta.at("predictor").get<std::string>();
  if (pk == "analytic") {
    return make_analytic_predictor(ckpt.meta.at("source_power").get<double>());
  }
  if (pk != "feed_forward") {
    throw std::runtime_error("unknown predictor kind: " + pk);
  }

  PredictorModel m;
  m.kind = PredictorKind::feed_forward;
  m.source_power = ckpt.meta.at("source_power").get<double>();
  m.antennas = ckpt.meta.at("antennas").get<int>();
  m.block_len = ckpt.meta.at("block_len").get<int>();
  m.schedule_steps = ckpt.meta.at("schedule_steps").get<int>();
  m.net.input_dim = query_input_dim(m.antennas, m.block_len);
  m.net.output_dim = 2 * m.antennas * m.block_len;

  const auto hidden = ckpt.meta.at("hidden").get<std::vector<int>>();
  int in = m.net.input_dim;
  for (std::size_t l = 0; l <= hidden.size(); ++l) {
    const int out =
        l < hidden.size() ? hidden[l] : m.net.output_dim;
    const std::string stem = "layer" + std::to_string(l);
    const NamedArray& w = find_array(ckpt, stem + ".weight");
    const NamedArray& b = find_array(ckpt, stem + ".bias");
    if (w.shape != std::vector<std::size_t>{static_cast<std::size_t>(out),
                                            static_cast<std::size_t>(in)} ||
        b.shape != std::vector<std::size_t>{static_cast<std::size_t>(out)}) {
      throw std::runtime_error("checkpoint layer " + std::to_string(l) +
                               " has unexpected shape");
    }
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    layer.w = w.data;
    layer.b = b.data;
    m.net.layers.push_back(std::move(layer));
    in = out;
  }
  return m;
}

}  // namespace dmlink
