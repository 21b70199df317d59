#pragma once

#include <vector>

#include "hdiff/types.hpp"

namespace hdiff {

enum class Sigma2Choice { Beta, BetaTilde };

struct StepCoefficients {
  double beta;
  double alpha;
  double alpha_bar;
  double alpha_bar_prev;
  double beta_tilde;
  double sigma2;
};

/// Per-step diffusion coefficients for t = 1..T, with the convention
/// alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  /// Builds the schedule from an arbitrary beta sequence.
  explicit NoiseSchedule(std::vector<double> betas, Sigma2Choice sigma2 = Sigma2Choice::BetaTilde);

  /// alpha_bar(t) = f(t)/f(0), f(t) = cos^2(((t/T + s)/(1 + s)) pi/2),
  /// beta_t = min(1 - alpha_bar(t)/alpha_bar(t-1), max_beta).
  static NoiseSchedule cosine(int steps, double s = 0.008, double max_beta = 0.999,
                              Sigma2Choice sigma2 = Sigma2Choice::BetaTilde);

  int steps() const { return static_cast<int>(beta_.size()); }
  StepCoefficients at(int t) const;
  double alpha_bar(int t) const;  // valid for 0 <= t <= T
  Sigma2Choice sigma2_choice() const { return sigma2_; }

  const std::vector<double>& betas() const { return beta_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }
  const std::vector<double>& beta_tildes() const { return beta_tilde_; }

  /// Schedule over a strictly increasing subsequence of timesteps, with
  /// beta'_i = 1 - alpha_bar(t_i) / alpha_bar(t_{i-1}).
  NoiseSchedule respaced(const std::vector<int>& timesteps) const;

 private:
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> beta_tilde_;
  Sigma2Choice sigma2_;
};

/// Evenly spaced timesteps t_1 < ... < t_S ending at T, for strided sampling.
std::vector<int> strided_timesteps(int total_steps, int sample_steps, int t_start = -1);

}  // namespace hdiff
