#pragma once

#include <cstddef>
#include <string>

#include "hdiff/grad/ops.hpp"
#include "hdiff/grad/tape.hpp"
#include "hdiff/rng.hpp"

namespace hdiff {

/// Parameters are referenced by store index: ParamStore::add may relocate them.
struct LinearLayer {
  std::size_t w = 0;  // in x out
  std::size_t b = 0;  // 1 x out
};

/// Weights ~ N(0, 1 / fan_in) unless zero_init; bias zero.
LinearLayer add_linear(grad::ParamStore& store, const std::string& name, int in, int out, Rng& rng,
                       bool zero_init = false);
grad::Var apply_linear(grad::Tape& tape, const grad::ParamStore& store, const LinearLayer& layer, grad::Var x);

/// Dense 3x3 convolution: weight (9 in) x out, bias 1 x out.
LinearLayer add_conv3x3(grad::ParamStore& store, const std::string& name, int in, int out, Rng& rng,
                        bool zero_init = false);
grad::Var apply_conv3x3(grad::Tape& tape, const grad::ParamStore& store, const LinearLayer& layer, grad::Var x,
                        int h, int w);

/// Row-wise layer norm modulated by (scale, shift) = split(SiLU(temb) W + b).
struct ModNorm {
  LinearLayer proj;  // embed x 2C
  int channels = 0;
};

ModNorm add_modnorm(grad::ParamStore& store, const std::string& name, int embed, int channels, Rng& rng);
/// `temb_act` is the already activated time embedding, 1 x embed.
grad::Var apply_modnorm(grad::Tape& tape, const grad::ParamStore& store, const ModNorm& norm, grad::Var x,
                        grad::Var temb_act);

}  // namespace hdiff
