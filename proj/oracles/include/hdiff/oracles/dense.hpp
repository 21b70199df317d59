#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "hdiff/field.hpp"
#include "hdiff/schedule.hpp"

// Brute-force reference implementations. Each one is written from the
// defining formula with no shared code paths with the library.
namespace hdiff::oracle {

/// Explicit m x m matrix of the periodised Gaussian mollifier on `grid`,
/// built pairwise from K(y, l) summed over periodic images and normalised.
Mat mollifier_matrix(double l, const RegularGrid& grid);

/// Exhaustive k nearest neighbours of `query` in `points` by (distance, index).
std::vector<std::pair<double, std::uint32_t>> knn(const Mat& points, const double* query, int k);

/// Inverse-distance k-NN interpolation by exhaustive scan.
Mat knn_interpolate(const Mat& src_coords, const Mat& src_values, const Mat& dst_coords, int k);

struct GaussianPosterior {
  Mat mean;  // column vector per channel, m x d
  Mat cov;   // m x m
};

/// Conditions the joint Gaussian of (x_{t-1}, x_t) given x0 on the observed
/// x_t, with the joint assembled from C = T T^T and the schedule.
GaussianPosterior condition_posterior(const Mat& T, const Mat& x0, const Mat& x_t, int t, const NoiseSchedule& sched);

/// Covariance of x_t | x0 from t single-step transitions
/// x_s = sqrt(a_s) x_{s-1} + sqrt(b_s) T xi_s, starting at zero covariance.
Mat composed_covariance(const Mat& T, int t, const NoiseSchedule& sched);

/// Dense depthwise convolution on a full h x w grid with a (2r+1)^2 kernel
/// per channel: out(c) = sum over in-bounds offsets o of kappa(o) v(c - o),
/// divided by the number of in-bounds offsets.
Mat dense_depthwise_conv(const Mat& values, int h, int w, const Mat& kernel, int kernel_size);

/// Bilinear resampling of a K x K kernel grid (per column) to K' x K'.
Mat bilinear_resize(const Mat& kernel, int from, int to);

/// Central finite-difference gradient of f at x.
Mat numeric_gradient(const std::function<double(const Mat&)>& f, const Mat& x, double h);

}  // namespace hdiff::oracle
