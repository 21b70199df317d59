#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "hdiff/field.hpp"
#include "hdiff/oracles/dense.hpp"
#include "hdiff/rng.hpp"

namespace hdiff {
namespace {

Mat uniform_points(Eigen::Index m, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Mat p(m, dim);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform();
  return p;
}

TEST(GridCoords, OneDimensionalCentres) {
  const Mat c = grid_coords(RegularGrid({2}));
  ASSERT_EQ(c.rows(), 2);
  ASSERT_EQ(c.cols(), 1);
  EXPECT_DOUBLE_EQ(c(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(c(1, 0), 0.75);
}

TEST(GridCoords, SinglePixel) {
  const Mat c = grid_coords(RegularGrid({1, 1}));
  ASSERT_EQ(c.rows(), 1);
  EXPECT_DOUBLE_EQ(c(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(c(0, 1), 0.5);
}

TEST(GridCoords, RowMajorFourByFour) {
  const Mat c = grid_coords(RegularGrid::square(4));
  ASSERT_EQ(c.rows(), 16);
  EXPECT_DOUBLE_EQ(c(0, 0), 0.125);
  EXPECT_DOUBLE_EQ(c(0, 1), 0.125);
  // Row-major: index 1 advances the second axis.
  EXPECT_DOUBLE_EQ(c(1, 0), 0.125);
  EXPECT_DOUBLE_EQ(c(1, 1), 0.375);
  EXPECT_TRUE((c.array() > 0.0).all() && (c.array() < 1.0).all());
}

TEST(GridCoords, RejectsEmptyOrNonPositiveDims) {
  EXPECT_THROW(RegularGrid({0, 4}), Error);
  EXPECT_THROW(RegularGrid(std::vector<int>{}), Error);
}

TEST(FieldTest, RowCountMismatchThrows) {
  EXPECT_THROW(Field(Mat::Zero(4, 2), Mat::Zero(3, 1)), Error);
}

TEST(Subsample, CountAndDistinctness) {
  const Field f = Field::on_grid(RegularGrid::square(4), uniform_points(16, 1, 1));
  const auto [sub, subset] = subsample(f, 4.0, 9);
  EXPECT_EQ(subset.size(), 4u);
  EXPECT_EQ(sub.size(), 4u);
  EXPECT_TRUE(std::is_sorted(subset.indices.begin(), subset.indices.end()));
  EXPECT_EQ(std::set<std::size_t>(subset.indices.begin(), subset.indices.end()).size(), 4u);
  EXPECT_FALSE(sub.on_full_grid());
}

TEST(Subsample, RateOneIsIdentity) {
  const Field f = Field::on_grid(RegularGrid::square(4), uniform_points(16, 2, 2));
  const auto [sub, subset] = subsample(f, 1.0, 3);
  ASSERT_EQ(subset.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(subset.indices[i], i);
  EXPECT_EQ(sub.values, f.values);
}

TEST(Subsample, DeterministicForSeed) {
  const auto a = draw_subset(64, 8.0, 77);
  const auto b = draw_subset(64, 8.0, 77);
  EXPECT_EQ(a.size(), 8u);
  EXPECT_EQ(a.indices, b.indices);
  EXPECT_NE(a.indices, draw_subset(64, 8.0, 78).indices);
}

TEST(Subsample, IsStrictRowSelection) {
  const Field f = Field::on_grid(RegularGrid::square(8), uniform_points(64, 3, 4));
  const auto [sub, subset] = subsample(f, 3.0, 5);
  EXPECT_EQ(subset.size(), subsample_count(64, 3.0));
  for (std::size_t r = 0; r < subset.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(subset.indices[r]);
    const auto dst = static_cast<Eigen::Index>(r);
    EXPECT_EQ(sub.values.row(dst), f.values.row(src));
    EXPECT_EQ(sub.coords.row(dst), f.coords.row(src));
  }
}

TEST(KnnInterpolate, ZeroDistanceTakesSourceValue) {
  const Mat src_coords = uniform_points(20, 2, 6);
  const Mat src_values = uniform_points(20, 3, 7);
  const Mat out = knn_interpolate(Field(src_coords, src_values), src_coords.topRows(5), 4);
  EXPECT_EQ(out, src_values.topRows(5));
}

TEST(KnnInterpolate, EquidistantSymmetricAverage) {
  Mat c(2, 1), v(2, 1), dst(1, 1);
  c << 0.25, 0.75;
  v << 1.0, 3.0;
  dst << 0.5;
  EXPECT_NEAR(knn_interpolate(Field(c, v), dst, 2)(0, 0), 2.0, 1e-12);
}

TEST(KnnInterpolate, MatchesExhaustiveScan) {
  for (const int k : {1, 4, 8}) {
    const Mat src = uniform_points(500, 2, 10 + static_cast<std::uint64_t>(k));
    const Mat val = uniform_points(500, 2, 20 + static_cast<std::uint64_t>(k));
    const Mat dst = uniform_points(200, 2, 30 + static_cast<std::uint64_t>(k));
    const SpatialHash hash(src, 1.0 / std::sqrt(500.0));
    std::vector<std::pair<double, std::uint32_t>> got;
    for (Eigen::Index i = 0; i < dst.rows(); ++i) {
      hash.knn(dst.row(i).data(), k, got);
      const auto want = oracle::knn(src, dst.row(i).data(), k);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t j = 0; j < got.size(); ++j) EXPECT_EQ(got[j].second, want[j].second);
    }
    const Mat a = knn_interpolate(Field(src, val), dst, k);
    const Mat b = oracle::knn_interpolate(src, val, dst, k);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12) << "k=" << k;
  }
}

TEST(KnnInterpolate, WeightsNonNegativeAndNormalised) {
  const InterpWeights w = knn_weights(uniform_points(300, 2, 40), uniform_points(100, 2, 41), 4);
  for (std::size_t r = 0; r < w.dst_rows; ++r) {
    double s = 0.0;
    for (int j = 0; j < w.k; ++j) {
      const double x = w.weight[r * static_cast<std::size_t>(w.k) + static_cast<std::size_t>(j)];
      EXPECT_GE(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(KnnInterpolate, TransposeIsAdjoint) {
  const InterpWeights w = knn_weights(uniform_points(80, 2, 50), uniform_points(60, 2, 51), 4);
  const Mat x = uniform_points(80, 2, 52);
  const Mat y = uniform_points(60, 2, 53);
  const double lhs = (w.apply(x).array() * y.array()).sum();
  const double rhs = (x.array() * w.apply_transpose(y).array()).sum();
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(KnnInterpolate, TiesBrokenByLowerIndex) {
  Mat c(3, 1);
  c << 0.4, 0.6, 0.4;  // rows 0 and 2 coincide
  Mat q(1, 1);
  q << 0.45;
  const SpatialHash hash(c, 0.1);
  std::vector<std::pair<double, std::uint32_t>> out;
  hash.knn(q.data(), 1, out);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].second, 0u);
}

TEST(DownsampleToGrid, SameGridNearestIsIdentity) {
  const RegularGrid g = RegularGrid::square(8);
  const Field f = Field::on_grid(g, uniform_points(64, 2, 60));
  const Field d = downsample_to_grid(f, g, 1);
  EXPECT_EQ(d.values, f.values);
  EXPECT_EQ(d.grid, g);
}

TEST(DownsampleToGrid, ConstantPreserved) {
  const Field fine = Field::on_grid(RegularGrid::square(16), Mat::Constant(256, 1, 0.37));
  const Field coarse = downsample_to_grid(fine, RegularGrid::square(8), 4);
  EXPECT_LE((coarse.values.array() - 0.37).abs().maxCoeff(), 1e-12);
}

TEST(DownsampleToGrid, ScatteredMatchesExhaustive) {
  const Mat src = uniform_points(400, 2, 70);
  const Mat val = uniform_points(400, 1, 71);
  const RegularGrid g = RegularGrid::square(12);
  const Field d = downsample_to_grid(Field(src, val), g, 4);
  const Mat want = oracle::knn_interpolate(src, val, grid_coords(g), 4);
  EXPECT_LE((d.values - want).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace hdiff
