#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "hdiff/field.hpp"
#include "hdiff/grad/tape.hpp"

// Differentiable primitives. Activations are 2D: rows are points (or grid
// cells in row-major order), columns are channels.
namespace hdiff::grad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
/// a + row, broadcasting a 1 x c row over every row of a.
Var add_row(Var a, Var row);
/// a * (1 + scale) + shift with 1 x c rows broadcast over a.
Var modulate(Var a, Var scale_row, Var shift_row);
/// x W + b
Var affine(Var x, Var w, Var b);
Var silu(Var a);
/// Per-row normalisation to zero mean and unit variance.
Var layer_norm(Var a, double eps = 1e-5);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);

Var gather_rows(Var a, const std::vector<std::uint32_t>& index);
Var scatter_add_rows(Var a, const std::vector<std::uint32_t>& index, Eigen::Index out_rows);
/// Fixed-weight linear combination of rows (k-NN interpolation).
Var interpolate(Var a, std::shared_ptr<const InterpWeights> weights);

Var sum(Var a);
Var mean(Var a);
/// Mean over all entries of (a - b)^2, as a 1 x 1 value.
Var mse(Var a, Var b);

/// 3x3 convolution with zero padding on an h x w grid, channels-last.
/// weight is (9 * c_in) x c_out with tap (dy, dx) at block 3 dy + dx.
Var conv3x3(Var x, int h, int w, Var weight, Var bias);
Var avg_pool2(Var x, int h, int w);
Var upsample2(Var x, int h, int w);

}  // namespace hdiff::grad
