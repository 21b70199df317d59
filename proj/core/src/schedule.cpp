#include "hdiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace hdiff {

NoiseSchedule::NoiseSchedule(std::vector<double> betas, Sigma2Choice sigma2)
    : beta_(std::move(betas)), sigma2_(sigma2) {
  if (beta_.empty()) throw Error("schedule needs at least one step");
  const std::size_t n = beta_.size();
  alpha_.resize(n);
  alpha_bar_.resize(n);
  beta_tilde_.resize(n);
  double prod = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(beta_[i] > 0.0 && beta_[i] < 1.0)) throw Error("beta values must lie in (0, 1)");
    alpha_[i] = 1.0 - beta_[i];
    const double prev = prod;
    prod *= alpha_[i];
    alpha_bar_[i] = prod;
    beta_tilde_[i] = (1.0 - prev) / (1.0 - prod) * beta_[i];
  }
}

NoiseSchedule NoiseSchedule::cosine(int steps, double s, double max_beta, Sigma2Choice sigma2) {
  if (steps < 1) throw Error("schedule steps must be >= 1");
  auto f = [&](double t) {
    const double c = std::cos((t / steps + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  std::vector<double> betas(static_cast<std::size_t>(steps));
  const double f0 = f(0.0);
  for (int t = 1; t <= steps; ++t) {
    const double ab = f(t) / f0;
    const double ab_prev = f(t - 1) / f0;
    betas[t - 1] = std::min(1.0 - ab / ab_prev, max_beta);
  }
  return NoiseSchedule(std::move(betas), sigma2);
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps()) throw Error("timestep " + std::to_string(t) + " out of range");
  return t == 0 ? 1.0 : alpha_bar_[t - 1];
}

StepCoefficients NoiseSchedule::at(int t) const {
  if (t < 1 || t > steps()) throw Error("timestep " + std::to_string(t) + " out of range");
  const auto i = static_cast<std::size_t>(t - 1);
  StepCoefficients c{};
  c.beta = beta_[i];
  c.alpha = alpha_[i];
  c.alpha_bar = alpha_bar_[i];
  c.alpha_bar_prev = alpha_bar(t - 1);
  c.beta_tilde = beta_tilde_[i];
  c.sigma2 = sigma2_ == Sigma2Choice::Beta ? c.beta : c.beta_tilde;
  return c;
}

NoiseSchedule NoiseSchedule::respaced(const std::vector<int>& timesteps) const {
  std::vector<double> betas;
  betas.reserve(timesteps.size());
  int prev = 0;
  for (int t : timesteps) {
    if (t <= prev || t > steps()) throw Error("respaced timesteps must be increasing within [1, T]");
    betas.push_back(1.0 - alpha_bar(t) / alpha_bar(prev));
    prev = t;
  }
  return NoiseSchedule(std::move(betas), sigma2_);
}

std::vector<int> strided_timesteps(int total_steps, int sample_steps, int t_start) {
  if (t_start < 0) t_start = total_steps;
  if (t_start > total_steps) throw Error("t_start exceeds schedule length");
  if (t_start == 0) return {};
  sample_steps = std::clamp(sample_steps, 1, t_start);
  std::vector<int> ts;
  ts.reserve(static_cast<std::size_t>(sample_steps));
  for (int i = 1; i <= sample_steps; ++i) {
    const int t = static_cast<int>(std::llround(static_cast<double>(i) * t_start / sample_steps));
    if (ts.empty() || t > ts.back()) ts.push_back(t);
  }
  return ts;
}

}  // namespace hdiff
