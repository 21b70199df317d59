#include <gtest/gtest.h>

#include <cmath>

#include "hdiff/diffusion.hpp"
#include "hdiff/oracles/dense.hpp"
#include "hdiff/rng.hpp"

namespace hdiff {
namespace {

Mat normal_mat(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

double max_rel(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

class DiffusionTest : public ::testing::Test {
 protected:
  RegularGrid grid_ = RegularGrid::square(8);
  Mollifier moll_{l_from_pixel_variance(1.0, 8), grid_};
  NoiseSchedule sched_ = NoiseSchedule::cosine(100);
  Field x0_ = Field::on_grid(grid_, normal_mat(64, 2, 1));
};

TEST_F(DiffusionTest, ForwardSampleDecomposition) {
  const DiffusionState s = forward_sample(x0_, 40, sched_, moll_, 7);
  const double ab = sched_.alpha_bar(40);
  const Mat expect = std::sqrt(ab) * s.tx0->values + std::sqrt(1.0 - ab) * s.t_xi->values;
  EXPECT_LE((s.x_t.values - expect).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(s.tx0->values, moll_.apply(x0_.values));
  EXPECT_EQ(s.x_t.grid, grid_);
}

TEST_F(DiffusionTest, ForwardSampleSmallTApproachesTx0) {
  const NoiseSchedule mild(std::vector<double>(10, 1e-10));
  const DiffusionState s = forward_sample(x0_, 1, mild, moll_, 3);
  EXPECT_LE((s.x_t.values - moll_.apply(x0_.values)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST_F(DiffusionTest, ForwardSampleDeterministicAndValidated) {
  EXPECT_EQ(forward_sample(x0_, 5, sched_, moll_, 9).x_t.values, forward_sample(x0_, 5, sched_, moll_, 9).x_t.values);
  EXPECT_THROW(forward_sample(x0_, 0, sched_, moll_, 9), Error);
  EXPECT_THROW(forward_sample(x0_, 101, sched_, moll_, 9), Error);
  EXPECT_THROW(forward_sample(Field(x0_.coords, x0_.values), 5, sched_, moll_, 9), Error);
}

TEST_F(DiffusionTest, PosteriorAtFirstStepIsTx0) {
  const Mat tx0 = moll_.apply(x0_.values);
  const Posterior p = posterior_params(normal_mat(64, 2, 2), tx0, 1, sched_);
  EXPECT_LE((p.mean - tx0).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_DOUBLE_EQ(p.variance, 0.0);
}

TEST_F(DiffusionTest, PosteriorZeroNoiseStateScalarCoefficient) {
  const Mat tx0 = moll_.apply(x0_.values);
  for (const int t : {2, 30, 99}) {
    const StepCoefficients c = sched_.at(t);
    const double k =
        (std::sqrt(c.alpha_bar_prev) * c.beta + std::sqrt(c.alpha) * (1.0 - c.alpha_bar_prev)) / (1.0 - c.alpha_bar);
    const Posterior p = posterior_params(tx0, tx0, t, sched_);
    EXPECT_LE((p.mean - k * tx0).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PosteriorOracle, MatchesDenseConditioning) {
  const NoiseSchedule sched = NoiseSchedule::cosine(10);
  for (const int m : {8, 16, 64}) {
    const RegularGrid g({m});
    for (const double var_px : {0.5, 1.0, 2.0}) {
      const double l = l_from_pixel_variance(var_px, m);
      const Mat T = oracle::mollifier_matrix(l, g);
      const Mat x0 = normal_mat(m, 1, static_cast<std::uint64_t>(m));
      const Mollifier moll(l, g);
      for (int t = 2; t <= 10; ++t) {
        const Mat xt = forward_sample(Field::on_grid(g, x0), t, sched, moll, static_cast<std::uint64_t>(t)).x_t.values;
        const Posterior p = posterior_params(xt, moll.apply(x0), t, sched);
        const oracle::GaussianPosterior o = oracle::condition_posterior(T, x0, xt, t, sched);
        EXPECT_LE(max_rel(p.mean, o.mean), 1e-6) << "m=" << m << " t=" << t;
        EXPECT_LE(max_rel(p.variance * T * T.transpose(), o.cov), 1e-6) << "m=" << m << " t=" << t;
      }
    }
  }
}

TEST_F(DiffusionTest, MuFromX0PredPerfectAndZero) {
  const int t = 25;
  const Mat xt = forward_sample(x0_, t, sched_, moll_, 11).x_t.values;
  const Posterior p = posterior_params(xt, moll_.apply(x0_.values), t, sched_);
  EXPECT_LE((mu_from_x0pred(xt, x0_.values, t, sched_, moll_) - p.mean).cwiseAbs().maxCoeff(), 1e-12);
  const PosteriorCoefficients pc = posterior_coefficients(t, sched_);
  EXPECT_LE((mu_from_x0pred(xt, Mat::Zero(64, 2), t, sched_, moll_) - pc.c_xt * xt).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_F(DiffusionTest, MuFromNoisePredPerfectAndZero) {
  const int t = 60;
  const DiffusionState s = forward_sample(x0_, t, sched_, moll_, 12);
  const Posterior p = posterior_params(s.x_t.values, s.tx0->values, t, sched_);
  EXPECT_LE(max_rel(mu_from_noisepred(s.x_t.values, s.t_xi->values, t, sched_), p.mean), 1e-6);
  const Mat zero = mu_from_noisepred(s.x_t.values, Mat::Zero(64, 2), t, sched_);
  EXPECT_LE((zero - s.x_t.values / std::sqrt(sched_.at(t).alpha)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_F(DiffusionTest, ParameterisationEquivalence) {
  const Mollifier moll(l_from_pixel_variance(0.5, 8), grid_);
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const int t = 1 + static_cast<int>(rng.below(100));
    const Mat xt = normal_mat(64, 2, mix_seed(14, static_cast<std::uint64_t>(i)));
    const Mat eps_hat = normal_mat(64, 2, mix_seed(15, static_cast<std::uint64_t>(i)));
    const double ab = sched_.alpha_bar(t);
    const Mat x0_hat = moll.apply_exact_inverse((xt - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab));
    const Mat a = mu_from_noisepred(xt, eps_hat, t, sched_);
    const Mat b = mu_from_x0pred(xt, x0_hat, t, sched_, moll);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-5) << "t=" << t;
    EXPECT_LE((noise_from_x0pred(xt, x0_hat, t, sched_, moll) - eps_hat).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST_F(DiffusionTest, EstimateTx0) {
  const DiffusionState s = forward_sample(x0_, 70, sched_, moll_, 16);
  EXPECT_LE((estimate_tx0(s.x_t.values, s.t_xi->values, 70, sched_) - s.tx0->values).cwiseAbs().maxCoeff(), 1e-9);
  const NoiseSchedule mild(std::vector<double>(5, 1e-12));
  const Mat xt = normal_mat(64, 2, 17);
  EXPECT_LE((estimate_tx0(xt, normal_mat(64, 2, 18), 1, mild) - xt).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(LossSimple, Examples) {
  const Mat a = normal_mat(30, 2, 19);
  EXPECT_DOUBLE_EQ(loss_simple(a, a), 0.0);
  EXPECT_NEAR(loss_simple(a.array() + 1.0, a), 1.0, 1e-12);
  const Mat b = normal_mat(30, 2, 20);
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  }
  EXPECT_NEAR(loss_simple(a, b), s / 60.0, 1e-12);
  EXPECT_THROW(loss_simple(a, b.topRows(3)), Error);
}

TEST(LossX0, WeightAtFirstStep) {
  const NoiseSchedule sched = NoiseSchedule::cosine(100);
  const double b1 = sched.at(1).beta;
  EXPECT_NEAR(loss_x0_weight(1, sched, b1), 1.0 / (2.0 * b1), 1e-9 / b1);
  const Mat a = normal_mat(10, 1, 21);
  EXPECT_DOUBLE_EQ(loss_x0(a, a, 5, sched, sched.at(5).beta), 0.0);
  const Mat b = normal_mat(10, 1, 22);
  const StepCoefficients c = sched.at(37);
  const double w = std::sqrt(c.alpha_bar_prev) * c.beta / (2.0 * c.beta * (1.0 - c.alpha_bar));
  EXPECT_NEAR(loss_x0(a, b, 37, sched, c.beta), w * loss_simple(a, b), 1e-12);
}

TEST_F(DiffusionTest, AncestralZeroVarianceIsPosteriorMean) {
  const DiffusionState s = forward_sample(x0_, 1, sched_, moll_, 23);
  const Posterior p = posterior_params(s.x_t.values, s.tx0->values, 1, sched_);
  const Mat a = ancestral_step(s.x_t.values, s.t_xi->values, 1, sched_, moll_, ParamMode::NoisePred, 5);
  const Mat b = ancestral_step(s.x_t.values, x0_.values, 1, sched_, moll_, ParamMode::X0Pred, 5);
  EXPECT_LE((a - p.mean).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((b - p.mean).cwiseAbs().maxCoeff(), 1e-6);
}

TEST_F(DiffusionTest, AncestralBranchesAgreeWithSameNoise) {
  const Mollifier moll(l_from_pixel_variance(0.5, 8), grid_);
  const int t = 50;
  const DiffusionState s = forward_sample(x0_, t, sched_, moll, 24);
  const Mat a = ancestral_step(s.x_t.values, s.t_xi->values, t, sched_, moll, ParamMode::NoisePred, 99);
  const Mat b = ancestral_step(s.x_t.values, x0_.values, t, sched_, moll, ParamMode::X0Pred, 99);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_EQ(a, ancestral_step(s.x_t.values, s.t_xi->values, t, sched_, moll, ParamMode::NoisePred, 99));
}

TEST_F(DiffusionTest, DdimExamples) {
  const DiffusionState s = forward_sample(x0_, 80, sched_, moll_, 25);
  EXPECT_LE((ddim_step(s.x_t.values, s.t_xi->values, 80, 0, sched_) - s.tx0->values).cwiseAbs().maxCoeff(), 1e-9);
  const double r = std::sqrt(sched_.alpha_bar(20) / sched_.alpha_bar(80));
  EXPECT_LE((ddim_step(s.x_t.values, Mat::Zero(64, 2), 80, 20, sched_) - r * s.x_t.values).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_THROW(ddim_step(s.x_t.values, s.t_xi->values, 10, 10, sched_), Error);
}

TEST(SamplerStability, FiniteTrajectories) {
  const RegularGrid g = RegularGrid::square(8);
  const Mollifier moll(l_from_pixel_variance(1.0, 8), g);
  for (const int steps : {10, 100, 1000}) {
    const NoiseSchedule sched = NoiseSchedule::cosine(steps);
    Mat x = moll.sample_noise(1).values;
    Mat y = x;
    for (int t = steps; t >= 1; --t) {
      const Mat f = 0.5 * x;  // affine toy denoiser
      x = ancestral_step(x, f, t, sched, moll, ParamMode::NoisePred, static_cast<std::uint64_t>(t));
      y = ddim_step(y, 0.5 * y, t, t - 1, sched);
      ASSERT_TRUE(x.allFinite()) << "T=" << steps << " t=" << t;
      ASSERT_TRUE(y.allFinite()) << "T=" << steps << " t=" << t;
    }
  }
}

}  // namespace
}  // namespace hdiff
