#include <gtest/gtest.h>

#include "hdiff/denoiser.hpp"
#include "hdiff/grad/gradcheck.hpp"
#include "hdiff/grad/ops.hpp"
#include "hdiff/grid_net.hpp"
#include "hdiff/oracles/dense.hpp"
#include "hdiff/rng.hpp"
#include "hdiff/sparse_conv.hpp"

namespace hdiff {
namespace {

Mat normal_mat(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

DenoiserConfig small_config(bool zero_init) {
  DenoiserConfig c;
  c.width = 16;
  c.time_dim = 32;
  c.train_res = 8;
  c.inner_res = 8;
  c.kernel_size = 3;
  c.sparse_blocks = 2;
  c.zero_init = zero_init;
  c.seed = 3;
  return c;
}

TEST(SparseConv, FullGridMatchesDenseOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int res = 4 + static_cast<int>(rng.below(29));  // 4..32
    const int k = 3 + 2 * static_cast<int>(rng.below(3));  // 3, 5, 7
    const int channels = 1 + static_cast<int>(rng.below(3));
    const Mat coords = grid_coords(RegularGrid::square(res));
    const Mat x = normal_mat(coords.rows(), channels, mix_seed(2, static_cast<std::uint64_t>(trial)));
    const Mat kernel = normal_mat(k * k, channels, mix_seed(3, static_cast<std::uint64_t>(trial)));
    const ConvStencil st = build_stencil(coords, (k - 1) / (2.0 * res), k);
    const Mat got = sparse_depthwise_conv(x, kernel, st);
    const Mat want = oracle::dense_depthwise_conv(x, res, res, kernel, k);
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-6) << "res=" << res << " k=" << k;
  }
}

TEST(SparseConv, IsolatedPointUsesCentreTap) {
  Mat coords(2, 2);
  coords << 0.1, 0.1, 0.9, 0.9;
  const Mat kernel = normal_mat(49, 2, 4);
  const Mat x = normal_mat(2, 2, 5);
  const Mat out = sparse_depthwise_conv(x, kernel, build_stencil(coords, 3.0 / 32.0, 7));
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(out(0, c), kernel(24, c) * x(0, c), 1e-15);
    EXPECT_NEAR(out(1, c), kernel(24, c) * x(1, c), 1e-15);
  }
}

TEST(SparseConv, ConstantFieldInteriorIsMeanKernel) {
  const int res = 16, k = 5;
  const Mat coords = grid_coords(RegularGrid::square(res));
  Mat kernel = normal_mat(k * k, 1, 6);
  kernel = 0.5 * (kernel + kernel.colwise().reverse().eval());  // point-symmetric
  const Mat out =
      sparse_depthwise_conv(Mat::Constant(res * res, 1, 2.0), kernel, build_stencil(coords, (k - 1) / (2.0 * res), k));
  const double mean_k = kernel.mean();
  for (int i = 2; i < res - 2; ++i) {
    for (int j = 2; j < res - 2; ++j) EXPECT_NEAR(out(i * res + j, 0), 2.0 * mean_k, 1e-12);
  }
}

TEST(SparseConv, SubsetOutputKeepsRowCount) {
  Rng rng(7);
  Mat coords(50, 2);
  for (Eigen::Index i = 0; i < coords.size(); ++i) coords.data()[i] = rng.uniform();
  const ConvStencil st = build_stencil(coords, 0.1, 7);
  EXPECT_EQ(sparse_depthwise_conv(normal_mat(50, 3, 8), normal_mat(49, 3, 9), st).rows(), 50);
  for (std::size_t i = 0; i < st.points; ++i) EXPECT_GT(st.inv_count[i], 0.0);
}

TEST(KernelResize, IdentityAndConstant) {
  const Mat k = normal_mat(49, 3, 10);
  EXPECT_LE((kernel_resize(k, 7, 7, 2) - k).cwiseAbs().maxCoeff(), 1e-15);
  const Mat c = kernel_resize(Mat::Constant(49, 2, 0.7), 7, 13, 2);
  ASSERT_EQ(c.rows(), 169);
  EXPECT_LE((c.array() - 0.7).abs().maxCoeff(), 1e-12);
}

TEST(KernelResize, MatchesBilinearOracle) {
  const Mat k = normal_mat(49, 4, 11);
  EXPECT_LE((kernel_resize(k, 7, 13, 2) - oracle::bilinear_resize(k, 7, 13)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GridNetTest, ShapePreserved) {
  grad::ParamStore store;
  Rng rng(12);
  const GridNet net(store, "g", 16, 64, {1, 2}, 32, rng, false);
  grad::Tape tape(false);
  const grad::Var y = net.forward(tape, store, tape.constant(normal_mat(256, 64, 13)),
                                  tape.constant(normal_mat(1, 32, 14)));
  EXPECT_EQ(y.rows(), 256);
  EXPECT_EQ(y.cols(), 64);
  EXPECT_TRUE(y.value().allFinite());
}

TEST(GridNetTest, GradientCheck) {
  grad::ParamStore store;
  Rng rng(15);
  const GridNet net(store, "g", 4, 4, {1, 2}, 8, rng, false);
  const Mat x = normal_mat(16, 4, 16);
  const Mat e = normal_mat(1, 8, 17);
  const Mat w = normal_mat(16, 4, 18);
  grad::GradCheckOptions o;
  o.per_group = 8;
  const auto r = grad::grad_check(
      store,
      [&](grad::Tape& t) {
        return grad::sum(grad::mul(net.forward(t, store, t.constant(x), t.constant(e)), t.constant(w)));
      },
      o);
  EXPECT_LE(r.max_rel_err, 1e-4);
}

TEST(DenoiserTest, TimestepFeatures) {
  const Mat f = timestep_features(0, 8);
  ASSERT_EQ(f.cols(), 8);
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(f(0, i), 0.0);
    EXPECT_DOUBLE_EQ(f(0, 4 + i), 1.0);
  }
  EXPECT_THROW(timestep_features(1, 7), Error);
}

TEST(DenoiserTest, OutputKeepsCoordinatesAndIsDeterministic) {
  const Denoiser net(small_config(false));
  Rng rng(19);
  Mat coords(30, 2);
  for (Eigen::Index i = 0; i < coords.size(); ++i) coords.data()[i] = rng.uniform();
  const Geometry g = net.prepare(coords);
  const Mat x = normal_mat(30, 1, 20);
  const Mat a = net.predict(g, x, 17);
  EXPECT_EQ(a.rows(), 30);
  EXPECT_EQ(a.cols(), 1);
  EXPECT_EQ(a, net.predict(g, x, 17));
  EXPECT_TRUE(a.allFinite());
}

TEST(DenoiserTest, ZeroInitOutputIsZero) {
  const Denoiser net(small_config(true));
  const Geometry g = net.prepare(grid_coords(RegularGrid::square(8)));
  EXPECT_EQ(net.predict(g, normal_mat(64, 1, 21), 400), Mat::Zero(64, 1));
}

TEST(DenoiserTest, ZeroInitBranchesGivePointwiseAffineMap) {
  Denoiser net(small_config(true));
  net.params().find("out.w")->value = normal_mat(16, 1, 22);
  const Geometry g = net.prepare(grid_coords(RegularGrid::square(8)));
  const Mat x = normal_mat(64, 1, 23);
  const Mat f0 = net.predict(g, Mat::Zero(64, 1), 5);
  const Mat f1 = net.predict(g, x, 5);
  const Mat f2 = net.predict(g, 2.0 * x, 5);
  EXPECT_LE(((f2 - f1) - (f1 - f0)).cwiseAbs().maxCoeff(), 1e-12);
  // Perturbing one point leaves every other output unchanged.
  Mat y = x;
  y(10, 0) += 1.0;
  const Mat fy = net.predict(g, y, 5);
  for (Eigen::Index i = 0; i < 64; ++i) {
    if (i != 10) EXPECT_NEAR(fy(i, 0), f1(i, 0), 1e-12);
  }
}

TEST(DenoiserTest, WholeNetworkGradientCheck) {
  Denoiser net(small_config(false));
  const Geometry g = net.prepare(grid_coords(RegularGrid::square(8)));
  const Mat x = normal_mat(64, 1, 24);
  const Mat w = normal_mat(64, 1, 25);
  grad::GradCheckOptions o;
  o.per_group = 32;
  const auto r = grad::grad_check(
      net.params(),
      [&](grad::Tape& t) { return grad::sum(grad::mul(net.forward(t, g, t.constant(x), 250), t.constant(w))); }, o);
  EXPECT_TRUE(r.passed) << r.max_rel_err;
  EXPECT_LE(r.max_rel_err, 1e-4);
}

TEST(DenoiserTest, InputGradientMatchesFiniteDifferences) {
  const Denoiser net(small_config(false));
  const Geometry g = net.prepare(grid_coords(RegularGrid::square(8)));
  const Mat x = normal_mat(64, 1, 26);
  const Mat w = normal_mat(64, 1, 27);
  grad::Tape tape(false);
  const grad::Var xv = tape.input(x, true);
  tape.backward(grad::sum(grad::mul(net.forward(tape, g, xv, 90), tape.constant(w))));
  const Mat analytic = tape.grad(xv.id());
  const Mat numeric = oracle::numeric_gradient(
      [&](const Mat& xx) { return (net.predict(g, xx, 90).array() * w.array()).sum(); }, x, 1e-4);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    worst = std::max(worst, grad::relative_error(analytic(i), numeric(i), 1e-6));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(DenoiserTest, ResolutionTransferUsesResizedKernel) {
  DenoiserConfig c = small_config(false);  // K=3 at 8: radius 1/8
  const Denoiser net(c);
  const Geometry g16 = net.prepare(grid_coords(RegularGrid::square(16)), RegularGrid::square(16));
  EXPECT_EQ(g16.kernel_eff, 5);
  ASSERT_TRUE(g16.resize);
  const Geometry g8 = net.prepare(grid_coords(RegularGrid::square(8)), RegularGrid::square(8));
  EXPECT_EQ(g8.kernel_eff, 3);
  EXPECT_FALSE(g8.resize);
  EXPECT_TRUE(net.predict(g16, normal_mat(256, 1, 28), 10).allFinite());
}

TEST(DenoiserTest, RejectsTooFewPoints) {
  const Denoiser net(small_config(false));
  EXPECT_THROW(net.prepare(Mat::Constant(2, 2, 0.5)), Error);
  EXPECT_THROW(net.prepare(Mat::Constant(8, 3, 0.5)), Error);
}

}  // namespace
}  // namespace hdiff
