#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "hdiff/types.hpp"

namespace hdiff {

/// Axis resolutions of a regular discretisation of [0,1]^n, n in {1, 2}.
/// For n = 2, dims = {H, W} and points are stored row-major.
struct RegularGrid {
  std::vector<int> dims;

  RegularGrid() = default;
  explicit RegularGrid(std::vector<int> d);
  static RegularGrid square(int res) { return RegularGrid({res, res}); }

  int rank() const { return static_cast<int>(dims.size()); }
  std::size_t size() const;
  bool operator==(const RegularGrid&) const = default;
};

/// Pixel-center coordinates in row-major order: ((i+0.5)/H, (j+0.5)/W).
Mat grid_coords(const RegularGrid& grid);

/// A discretised function: m coordinates in [0,1]^n with d values each.
struct Field {
  Mat coords;
  Mat values;
  std::optional<RegularGrid> grid;

  Field() = default;
  Field(Mat c, Mat v, std::optional<RegularGrid> g = std::nullopt);
  static Field on_grid(const RegularGrid& grid, Mat values);

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  int channels() const { return static_cast<int>(values.cols()); }
  int dim() const { return static_cast<int>(coords.cols()); }
  bool on_full_grid() const { return grid.has_value(); }
};

struct CoordinateSubset {
  std::size_t parent_count = 0;
  std::vector<std::size_t> indices;  // strictly increasing

  std::size_t size() const { return indices.size(); }
};

/// Number of coordinates kept at a given subsampling rate.
std::size_t subsample_count(std::size_t m, double rate);

/// Uniform selection without replacement of round(m / rate) rows.
/// rate <= 1 returns the identity subset.
std::pair<Field, CoordinateSubset> subsample(const Field& field, double rate, std::uint64_t seed);

CoordinateSubset draw_subset(std::size_t m, double rate, std::uint64_t seed);
Mat select_rows(const Mat& m, const CoordinateSubset& subset);
Field select(const Field& field, const CoordinateSubset& subset);

/// Uniform bucket grid over [0,1]^n for exact neighbour queries.
class SpatialHash {
 public:
  SpatialHash(const Mat& points, double cell_size);

  /// Indices of the k nearest points, ordered by (distance, index).
  void knn(const double* query, int k, std::vector<std::pair<double, std::uint32_t>>& out) const;
  /// Indices of all points with max-norm distance <= radius, ascending.
  void within_box(const double* query, double radius, std::vector<std::uint32_t>& out) const;

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }

 private:
  int cell_of(double x) const;
  std::size_t flat(int cx, int cy) const { return static_cast<std::size_t>(cy) * cells_ + cx; }

  Mat points_;
  int dim_;
  double cell_;
  int cells_;
  std::vector<std::uint32_t> start_;
  std::vector<std::uint32_t> ids_;
};

/// Sparse m' x m interpolation operator: each destination row mixes k sources.
struct InterpWeights {
  std::size_t src_rows = 0;
  std::size_t dst_rows = 0;
  int k = 0;
  std::vector<std::uint32_t> index;  // dst_rows * k
  std::vector<double> weight;        // dst_rows * k

  Mat apply(const Mat& src_values) const;
  /// Transpose action: scatters destination rows back onto the sources.
  Mat apply_transpose(const Mat& dst_values) const;
};

inline constexpr double kInterpEps = 1e-8;

/// Inverse-distance weights over the k nearest sources. A zero-distance
/// neighbour takes the full weight.
InterpWeights knn_weights(const Mat& src_coords, const Mat& dst_coords, int k);

Mat knn_interpolate(const Field& src, const Mat& dst_coords, int k);
Field downsample_to_grid(const Field& field, const RegularGrid& grid, int k);

}  // namespace hdiff
