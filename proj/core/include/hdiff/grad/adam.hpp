#pragma once

#include <cstdint>
#include <vector>

#include "hdiff/grad/tape.hpp"

namespace hdiff::grad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers aligned with a ParamStore's order.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Mat> m;
  std::vector<Mat> v;

  static AdamState zeros_like(const ParamStore& store, AdamConfig config = {});
};

/// Bias-corrected Adam update using each parameter's grad slot.
void adam_step(ParamStore& params, AdamState& state);

}  // namespace hdiff::grad
