#pragma once

#include <cstdint>
#include <optional>

#include "hdiff/field.hpp"
#include "hdiff/mollifier.hpp"
#include "hdiff/schedule.hpp"

namespace hdiff {

enum class ParamMode { NoisePred, X0Pred };

struct DiffusionState {
  Field x_t;
  int t = 0;
  std::optional<Field> tx0;   // T x_0, training only
  std::optional<Field> t_xi;  // T xi, training only
};

/// x_t = sqrt(ab_t) T x0 + sqrt(1 - ab_t) T xi, a draw of q(x_t | x_0).
DiffusionState forward_sample(const Field& x0, int t, const NoiseSchedule& sched, const Mollifier& moll,
                              std::uint64_t seed);

/// Affine coefficients of the posterior mean: mu = c_x0 * (T x0) + c_xt * x_t.
struct PosteriorCoefficients {
  double c_x0;
  double c_xt;
};
PosteriorCoefficients posterior_coefficients(int t, const NoiseSchedule& sched);

struct Posterior {
  Mat mean;
  double variance;  // beta_tilde; full covariance is variance * TT*
};
Posterior posterior_params(const Mat& x_t, const Mat& tx0, int t, const NoiseSchedule& sched);

/// Mean of p(x_{t-1} | x_t) when the network predicts unmollified x0.
Mat mu_from_x0pred(const Mat& x_t, const Mat& x0_hat, int t, const NoiseSchedule& sched, const Mollifier& moll);
/// Mean of p(x_{t-1} | x_t) when the network predicts the mollified noise T xi.
Mat mu_from_noisepred(const Mat& x_t, const Mat& t_xi_hat, int t, const NoiseSchedule& sched);
/// (x_t - sqrt(1 - ab_t) T xi_hat) / sqrt(ab_t)
Mat estimate_tx0(const Mat& x_t, const Mat& t_xi_hat, int t, const NoiseSchedule& sched);

/// Mean over coordinates and channels of the squared difference.
double loss_simple(const Mat& prediction, const Mat& target);
/// Weight sqrt(ab_{t-1}) beta_t / (2 sigma2 (1 - ab_t)) applied to the mean squared error.
double loss_x0_weight(int t, const NoiseSchedule& sched, double sigma2);
double loss_x0(const Mat& x0_hat, const Mat& x0, int t, const NoiseSchedule& sched, double sigma2);

/// One ancestral step. Noise is injected through T, i.e. with covariance sigma_t^2 TT*.
Mat ancestral_step(const Mat& x_t, const Mat& f_out, int t, const NoiseSchedule& sched, const Mollifier& moll,
                   ParamMode mode, std::uint64_t seed);

/// Deterministic DDIM update from t to t_prev < t using the predicted T xi.
Mat ddim_step(const Mat& x_t, const Mat& t_xi_hat, int t, int t_prev, const NoiseSchedule& sched);

/// Converts an x0 prediction into the equivalent mollified-noise prediction.
Mat noise_from_x0pred(const Mat& x_t, const Mat& x0_hat, int t, const NoiseSchedule& sched, const Mollifier& moll);

}  // namespace hdiff
