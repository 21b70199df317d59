#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hdiff/grad/tape.hpp"

namespace hdiff::grad {

struct GradCheckOptions {
  int per_group = 32;  // entries sampled per parameter tensor, capped by its size
  double h = 1e-4;     // central-difference step
  double tol = 1e-4;
  double abs_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string group;
  std::size_t index;
  double analytic;
  double numeric;
  double rel_err;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  std::size_t groups = 0;
  double max_rel_err = 0.0;
  bool passed = false;
};

/// Builds a scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

/// |a - n| / max(|a|, |n|, abs_floor)
double relative_error(double analytic, double numeric, double abs_floor);

/// Compares tape gradients against central differences on sampled entries
/// of every parameter tensor. Parameter values are restored on return.
GradCheckReport grad_check(ParamStore& params, const LossBuilder& loss, const GradCheckOptions& opts = {});

}  // namespace hdiff::grad
