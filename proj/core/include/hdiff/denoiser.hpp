#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "hdiff/field.hpp"
#include "hdiff/grid_net.hpp"
#include "hdiff/layers.hpp"
#include "hdiff/sparse_conv.hpp"

namespace hdiff {

struct DenoiserConfig {
  int channels = 1;       // d, data channels in and out
  int width = 64;         // base channel width
  int kernel_size = 7;    // K at the training resolution
  int train_res = 32;     // fixes the kernel footprint in domain units
  int inner_res = 16;
  int sparse_blocks = 3;  // per side
  std::vector<int> channel_mults{1, 2};
  int time_dim = 128;     // sinusoidal features and embedding width
  int knn = 4;
  bool zero_init = true;  // zero the last layer of every residual branch and the output
  std::uint64_t seed = 0;

  /// Max-norm kernel radius in domain units: (K - 1) / 2 training pixels.
  double radius() const { return 0.5 * (kernel_size - 1) / train_res; }
};

/// Everything about a coordinate set that is independent of the values:
/// conv neighbourhoods and the k-NN maps to and from the inner grid.
/// Built once and reused across diffusion steps.
struct Geometry {
  Mat coords;
  int kernel_eff = 0;                     // kernel size used by the stencil
  std::shared_ptr<const Mat> resize;      // kernel_eff^2 x K^2, null when kernel_eff == K
  std::shared_ptr<const ConvStencil> stencil;
  std::shared_ptr<const InterpWeights> down;  // coords -> inner grid
  std::shared_ptr<const InterpWeights> up;    // inner grid -> coords

  std::size_t points() const { return static_cast<std::size_t>(coords.rows()); }
};

/// 128-dim sinusoidal features [sin(t f_i), cos(t f_i)], f_i = 10000^(-i / 64).
Mat timestep_features(int t, int dim);

/// Multi-scale operator network f(x_t, t) on arbitrary 2D coordinate sets.
///
/// lift -> sparse blocks (skips) -> k-NN to inner grid -> GridNet -> k-NN
/// back, added -> sparse blocks with additive skips -> projection.
class Denoiser {
 public:
  explicit Denoiser(DenoiserConfig cfg);

  const DenoiserConfig& config() const { return cfg_; }
  grad::ParamStore& params() { return store_; }
  const grad::ParamStore& params() const { return store_; }

  /// `grid` enables the resized-kernel path when the footprint spans a whole
  /// number of pixels at that resolution.
  Geometry prepare(const Mat& coords, const std::optional<RegularGrid>& grid = std::nullopt) const;

  grad::Var forward(grad::Tape& tape, const Geometry& geom, grad::Var x, int t) const;
  /// Forward without parameter gradients.
  Mat predict(const Geometry& geom, const Mat& x, int t) const;

 private:
  struct SparseBlock {
    std::size_t kernel = 0;  // K^2 x width
    std::size_t bias = 0;    // 1 x width
    ModNorm norm;
    LinearLayer mlp1, mlp2, mlp3;
  };
  SparseBlock add_block(const std::string& name, Rng& rng);
  grad::Var block(grad::Tape& tape, const Geometry& geom, const SparseBlock& b, grad::Var x,
                  grad::Var temb_act) const;

  DenoiserConfig cfg_;
  grad::ParamStore store_;
  LinearLayer time1_, time2_;
  LinearLayer lift_;
  std::vector<SparseBlock> enc_;
  std::vector<SparseBlock> dec_;
  GridNet grid_;
  LinearLayer out_;
  Mat inner_coords_;
};

}  // namespace hdiff
