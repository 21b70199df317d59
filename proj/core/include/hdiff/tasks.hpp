#pragma once

#include <cstdint>
#include <functional>
#include <string_view>

#include "hdiff/config.hpp"
#include "hdiff/denoiser.hpp"
#include "hdiff/diffusion.hpp"
#include "hdiff/mollifier.hpp"

namespace hdiff {

enum class Sampler { Ddim, Ancestral };
Sampler parse_sampler(std::string_view s);

/// Trained network plus the diffusion settings it was trained with.
struct DiffusionModel {
  const Denoiser* net = nullptr;
  NoiseSchedule schedule;
  double l = 0.0;  // mollifier smoothing, domain units
  int train_res = 0;
  ParamMode mode = ParamMode::NoisePred;
  WienerConfig wiener;

  static DiffusionModel from(const Denoiser& net, const TrainConfig& cfg);
  /// Mollifier on `grid` with white noise scaled to the training resolution.
  Mollifier mollifier(const RegularGrid& grid) const;
};

/// Called after every reverse step with the step's target time and state.
using StepCallback = std::function<void(int t, const Mat& x)>;

struct SampleOptions {
  Sampler sampler = Sampler::Ddim;
  int steps = 100;
  std::uint64_t seed = 0;
  /// Clamp each step's T x0 estimate to the data range [-1, 1] and rederive
  /// the noise estimate from it. Near T the estimate divides the network
  /// error by sqrt(alpha_bar), which otherwise swamps coarse strides.
  bool clip_denoised = true;
  StepCallback on_step;
};

struct SampleResult {
  Field demollified;  // Wiener inverse of raw, clamped to [-1, 1]
  Field raw;          // the model's estimate of T x0
};

/// Unconditional sample on any grid, starting from mollified noise.
SampleResult sample(const DiffusionModel& model, const RegularGrid& grid, const SampleOptions& opts);

/// Upsamples by k-NN, diffuses to t_start on the target grid and runs the
/// reverse process back to 0. t_start = 0 returns the interpolated input.
SampleResult super_resolve(const DiffusionModel& model, const Field& input, const RegularGrid& target, int t_start,
                           const SampleOptions& opts);

struct InpaintOptions {
  double lambda = 1.0;
  int t_start = 0;  // 0: start from pure noise at T
  bool jacobian_free = false;
  SampleOptions sampling;
};

/// Reverse process from the noised observation with reconstruction guidance:
/// after each sampler step, x_prev -= lambda_eff * grad_{x_t} |mask * (T x0_hat(x_t) - T obs)|^2
/// with lambda_eff = lambda * sqrt(ab_t * ab_prev) / 2. mask holds 1 at known points.
SampleResult inpaint(const DiffusionModel& model, const Field& observed, const Mat& mask, const InpaintOptions& opts);

/// Wiener inverse clamped to [-1, 1].
Field demollify(const Field& field, const Mollifier& moll, const WienerConfig& cfg);

}  // namespace hdiff
