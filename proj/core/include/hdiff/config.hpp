#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hdiff/denoiser.hpp"
#include "hdiff/diffusion.hpp"
#include "hdiff/mollifier.hpp"
#include "hdiff/schedule.hpp"

namespace hdiff {

/// Flat run configuration. Text form is `key = value` per line, `#` starts a
/// comment. `steps` counts optimizer steps; the diffusion length is
/// `diffusion_steps`.
struct TrainConfig {
  // data
  std::string dataset = "gaussian_bumps";  // gaussian_bumps | stripes | directory of IDF1 files
  int data_count = 2048;
  int resolution = 32;
  int channels = 1;
  // optimisation
  int batch_size = 16;
  int steps = 5000;
  double subsample_rate = 4.0;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  // diffusion
  int diffusion_steps = 1000;
  std::string schedule = "cosine";
  double cosine_s = 0.008;
  double max_beta = 0.999;
  Sigma2Choice sigma2 = Sigma2Choice::BetaTilde;
  ParamMode param_mode = ParamMode::NoisePred;
  double blur_variance = 1.0;  // pixel^2 at `resolution`
  double wiener_eps = 1e-2;
  // model
  int width = 64;
  int kernel_size = 7;
  int inner_res = 16;
  int sparse_blocks = 3;
  std::vector<int> channel_mults{1, 2};
  int time_dim = 128;
  int knn = 4;
  // tasks
  std::string sampler = "ddim";  // ddim | ancestral
  int sample_steps = 100;
  double guidance_lambda = 1.0;
  int t_start = 0;  // 0: full reverse process from T
  bool jacobian_free = false;
  // outputs
  std::string checkpoint = "model.idck";
  std::string metrics = "metrics.csv";
  int checkpoint_every = 1000;

  DenoiserConfig model() const;
  NoiseSchedule noise_schedule() const;
  /// Mollifier smoothing parameter in domain units.
  double mollifier_l() const { return l_from_pixel_variance(blur_variance, resolution); }
  WienerConfig wiener() const { return WienerConfig{wiener_eps}; }
  /// Every key in canonical form; parses back to an equal config.
  std::string to_text() const;
  void validate() const;
};

/// Assigns one key. Throws on unknown keys or malformed values.
void config_set(TrainConfig& cfg, std::string_view key, std::string_view value);

/// Parses config text. Duplicate keys keep the last value and add a warning.
/// All unknown keys are reported in a single error.
TrainConfig config_parse(std::string_view text, std::vector<std::string>* warnings = nullptr);
TrainConfig config_load(const std::string& path, std::vector<std::string>* warnings = nullptr);

ParamMode parse_param_mode(std::string_view s);
std::string_view to_string(ParamMode m);

}  // namespace hdiff
