// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dmlink {

// Adam moments for one parameter vector.
struct AdamSlot {
  std::vector<double> m;
  std::vector<double> v;

  void init(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected update; `step` is 1-based and shared across slots.
void adam_update(AdamSlot& slot, std::span<double> params,
                 std::span<const double> grads, double lr, long step,
                 const AdamConfig& cfg = {});

// Linear warmup into a cosine decay toward zero.
double lr_at(long step, long total_steps, double base_lr, double warmup_frac);

}  // namespace dmlink
