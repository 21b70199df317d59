#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "hdiff/field.hpp"

namespace hdiff {

struct WienerConfig {
  double eps = 1e-2;  // inverse-SNR estimate, > 0
};

/// Smoothing parameter l (domain units squared) for a Gaussian blur of the
/// given pixel variance at resolution `res`. Variance equals 2l.
inline double l_from_pixel_variance(double variance_px, int res) {
  return 0.5 * variance_px / (static_cast<double>(res) * res);
}

/// Periodised Gaussian K(y, l) = (4 pi l)^{-n/2} exp(-|y|^2 / 4l) sampled at
/// the grid offsets and renormalised to sum to 1. Row r holds offset r in
/// row-major order, so row 0 is the zero offset.
Mat kernel_weights(double l, const RegularGrid& grid);

/// Gaussian mollification operator T on a regular grid with circular
/// boundary. T is diagonal in the discrete Fourier basis; symbol() holds its
/// (real, positive) eigenvalues in row-major frequency order.
///
/// White noise is scaled by sqrt(m / reference_points) so that the
/// covariance of mollified noise stays consistent across resolutions; with
/// the default reference (m itself) draws are standard normal per point.
class Mollifier {
 public:
  Mollifier(double l, RegularGrid grid, std::size_t reference_points = 0);

  double l() const { return l_; }
  const RegularGrid& grid() const { return grid_; }
  const Mat& kernel() const { return kernel_; }
  const std::vector<double>& symbol() const { return symbol_; }
  double noise_std() const { return noise_std_; }

  /// T x, applied channel-wise. `values` is m x d in grid order.
  Mat apply(const Mat& values) const;
  /// T* x. Equal to apply() for the symmetric Gaussian kernel.
  Mat apply_adjoint(const Mat& values) const;
  Mat apply_exact_inverse(const Mat& values) const;
  Mat apply_wiener_inverse(const Mat& values, const WienerConfig& cfg) const;

  Field mollify(const Field& field) const;
  Field mollify_adjoint(const Field& field) const;
  Field exact_inverse(const Field& field) const;
  Field wiener_inverse(const Field& field, const WienerConfig& cfg) const;

  /// Draws white noise on the grid and applies T: a sample of N(0, s^2 TT*).
  Field sample_noise(std::uint64_t seed, int channels = 1) const;
  Mat white_noise(std::uint64_t seed, int channels) const;

 private:
  struct Plans;
  template <typename Gain>
  Mat filter(const Mat& values, Gain gain) const;
  void check_field(const Field& field) const;

  double l_;
  RegularGrid grid_;
  Mat kernel_;
  std::vector<double> symbol_;       // full spectrum, m entries
  std::vector<double> half_symbol_;  // r2c layout
  double noise_std_ = 1.0;
  std::shared_ptr<Plans> plans_;
};

Field sample_mollified_noise(const RegularGrid& grid, double l, std::uint64_t seed, int channels = 1);

}  // namespace hdiff
