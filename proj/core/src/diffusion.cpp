#include "hdiff/diffusion.hpp"

#include <cmath>

#include "hdiff/rng.hpp"

namespace hdiff {
namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(std::string(what) + ": shape mismatch");
}

}  // namespace

DiffusionState forward_sample(const Field& x0, int t, const NoiseSchedule& sched, const Mollifier& moll,
                              std::uint64_t seed) {
  if (!x0.grid) throw Error("forward_sample requires a full-grid field");
  if (t < 1 || t > sched.steps()) throw Error("forward_sample requires 1 <= t <= T");
  const double ab = sched.alpha_bar(t);
  Field tx0 = moll.mollify(x0);
  Field t_xi = moll.sample_noise(seed, x0.channels());
  Mat xt = std::sqrt(ab) * tx0.values + std::sqrt(1.0 - ab) * t_xi.values;
  DiffusionState s;
  s.x_t = Field(x0.coords, std::move(xt), x0.grid);
  s.t = t;
  s.tx0 = std::move(tx0);
  s.t_xi = std::move(t_xi);
  return s;
}

PosteriorCoefficients posterior_coefficients(int t, const NoiseSchedule& sched) {
  const StepCoefficients c = sched.at(t);
  const double denom = 1.0 - c.alpha_bar;
  return {std::sqrt(c.alpha_bar_prev) * c.beta / denom, std::sqrt(c.alpha) * (1.0 - c.alpha_bar_prev) / denom};
}

Posterior posterior_params(const Mat& x_t, const Mat& tx0, int t, const NoiseSchedule& sched) {
  check_same_shape(x_t, tx0, "posterior_params");
  const PosteriorCoefficients pc = posterior_coefficients(t, sched);
  return {pc.c_x0 * tx0 + pc.c_xt * x_t, sched.at(t).beta_tilde};
}

Mat mu_from_x0pred(const Mat& x_t, const Mat& x0_hat, int t, const NoiseSchedule& sched, const Mollifier& moll) {
  check_same_shape(x_t, x0_hat, "mu_from_x0pred");
  const PosteriorCoefficients pc = posterior_coefficients(t, sched);
  return pc.c_x0 * moll.apply(x0_hat) + pc.c_xt * x_t;
}

Mat mu_from_noisepred(const Mat& x_t, const Mat& t_xi_hat, int t, const NoiseSchedule& sched) {
  check_same_shape(x_t, t_xi_hat, "mu_from_noisepred");
  const StepCoefficients c = sched.at(t);
  return (x_t - (c.beta / std::sqrt(1.0 - c.alpha_bar)) * t_xi_hat) / std::sqrt(c.alpha);
}

Mat estimate_tx0(const Mat& x_t, const Mat& t_xi_hat, int t, const NoiseSchedule& sched) {
  check_same_shape(x_t, t_xi_hat, "estimate_tx0");
  const double ab = sched.alpha_bar(t);
  return (x_t - std::sqrt(1.0 - ab) * t_xi_hat) / std::sqrt(ab);
}

Mat noise_from_x0pred(const Mat& x_t, const Mat& x0_hat, int t, const NoiseSchedule& sched, const Mollifier& moll) {
  const double ab = sched.alpha_bar(t);
  return (x_t - std::sqrt(ab) * moll.apply(x0_hat)) / std::sqrt(1.0 - ab);
}

double loss_simple(const Mat& prediction, const Mat& target) {
  check_same_shape(prediction, target, "loss_simple");
  if (prediction.size() == 0) throw Error("loss_simple: empty input");
  return (prediction - target).squaredNorm() / static_cast<double>(prediction.size());
}

double loss_x0_weight(int t, const NoiseSchedule& sched, double sigma2) {
  const StepCoefficients c = sched.at(t);
  return std::sqrt(c.alpha_bar_prev) * c.beta / (2.0 * sigma2 * (1.0 - c.alpha_bar));
}

double loss_x0(const Mat& x0_hat, const Mat& x0, int t, const NoiseSchedule& sched, double sigma2) {
  return loss_x0_weight(t, sched, sigma2) * loss_simple(x0_hat, x0);
}

Mat ancestral_step(const Mat& x_t, const Mat& f_out, int t, const NoiseSchedule& sched, const Mollifier& moll,
                   ParamMode mode, std::uint64_t seed) {
  check_same_shape(x_t, f_out, "ancestral_step");
  const StepCoefficients c = sched.at(t);
  const double sigma = std::sqrt(c.sigma2);
  Mat xi = Mat::Zero(x_t.rows(), x_t.cols());
  if (sigma > 0.0) xi = moll.white_noise(seed, static_cast<int>(x_t.cols()));
  if (mode == ParamMode::X0Pred) {
    const PosteriorCoefficients pc = posterior_coefficients(t, sched);
    return pc.c_xt * x_t + moll.apply(pc.c_x0 * f_out + sigma * xi);
  }
  Mat mean = mu_from_noisepred(x_t, f_out, t, sched);
  if (sigma > 0.0) mean += sigma * moll.apply(xi);
  return mean;
}

Mat ddim_step(const Mat& x_t, const Mat& t_xi_hat, int t, int t_prev, const NoiseSchedule& sched) {
  check_same_shape(x_t, t_xi_hat, "ddim_step");
  if (t_prev < 0 || t_prev >= t) throw Error("ddim_step requires 0 <= t_prev < t");
  const double ab = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t_prev);
  const Mat tx0 = (x_t - std::sqrt(1.0 - ab) * t_xi_hat) / std::sqrt(ab);
  return std::sqrt(ab_prev) * tx0 + std::sqrt(1.0 - ab_prev) * t_xi_hat;
}

}  // namespace hdiff
