#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "hdiff/grad/tape.hpp"
#include "hdiff/types.hpp"

namespace hdiff {

/// Neighbourhoods N(c) and kernel lookup taps for one coordinate set.
///
/// N(c) holds every point within max-norm distance `radius` of c (c itself
/// included). The offset c - y is mapped to continuous kernel-cell
/// coordinates u = (c - y) / spacing + (K - 1) / 2 with spacing =
/// 2 radius / (K - 1), and kappa(c - y) is the bilinear (linear in 1D)
/// interpolation of the K^n kernel at u. Zero-weight taps are dropped.
struct ConvStencil {
  int dim = 0;
  int kernel_size = 0;
  double radius = 0.0;
  std::size_t points = 0;
  std::vector<std::uint32_t> edge_start;  // points + 1, CSR over edges
  std::vector<std::uint32_t> neighbour;   // source point of each edge
  std::vector<std::uint32_t> tap_start;   // edges + 1, CSR over taps
  std::vector<std::uint32_t> tap;         // kernel row index
  std::vector<double> tap_weight;
  std::vector<double> inv_count;          // 1 / |N(c)|

  std::size_t edges() const { return neighbour.size(); }
};

ConvStencil build_stencil(const Mat& coords, double radius, int kernel_size);

/// Depthwise kernel layout: K^n rows (row-major over kernel cells) by C
/// columns, one column per channel.
Mat sparse_depthwise_conv(const Mat& values, const Mat& kernel, const ConvStencil& stencil);

namespace grad {
/// Differentiable form of sparse_depthwise_conv in both values and kernel.
Var sparse_depthwise_conv(Var values, Var kernel, std::shared_ptr<const ConvStencil> stencil);
}  // namespace grad

/// Linear map taking a K^n kernel to its bilinear resampling on K'^n cells
/// spanning the same footprint: new cell j samples old position j (K-1)/(K'-1).
Mat kernel_resize_matrix(int from, int to, int dim);
Mat kernel_resize(const Mat& kernel, int from, int to, int dim);

}  // namespace hdiff
