// SPDX-License-Identifier: Apache-2.0

#include "dmlink/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dmlink {

void adam_update(AdamSlot& slot, std::span<double> params,
                 std::span<const double> grads, double lr, long step,
                 const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != slot.m.size()) {
    throw std::invalid_argument("adam_update: size mismatch");
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * grads[i];
    slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = slot.m[i] / bc1;
    const double vhat = slot.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

double lr_at(long step, long total_steps, double base_lr, double warmup_frac) {
  if (total_steps <= 0) throw std::invalid_argument("lr_at: no steps");
  const long warmup = std::lround(warmup_frac * static_cast<double>(total_steps));
  if (warmup > 0 && step < warmup) {
    return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  const long tail = total_steps - warmup;
  if (tail <= 1) return base_lr;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(tail - 1);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace dmlink
