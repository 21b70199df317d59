#include "hdiff/denoiser.hpp"

#include <cmath>

namespace hdiff {

using grad::Var;

Mat timestep_features(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw Error("time embedding dimension must be even");
  const int half = dim / 2;
  Mat f(1, dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    f(0, i) = std::sin(t * freq);
    f(0, half + i) = std::cos(t * freq);
  }
  return f;
}

Denoiser::Denoiser(DenoiserConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.channels < 1 || cfg_.width < 1) throw Error("denoiser: channels and width must be positive");
  if (cfg_.kernel_size < 1 || cfg_.kernel_size % 2 == 0) throw Error("denoiser: kernel_size must be odd");
  if (cfg_.sparse_blocks < 0) throw Error("denoiser: sparse_blocks must be nonnegative");
  if (cfg_.knn < 1) throw Error("denoiser: knn must be positive");
  if (cfg_.train_res < 1 || cfg_.inner_res < 1) throw Error("denoiser: resolutions must be positive");
  Rng rng(mix_seed(cfg_.seed, 0x5EED));
  const int w = cfg_.width;
  const int e = cfg_.time_dim;
  const bool z = cfg_.zero_init;
  time1_ = add_linear(store_, "time.fc1", e, e, rng);
  time2_ = add_linear(store_, "time.fc2", e, e, rng);
  lift_ = add_linear(store_, "lift", cfg_.channels, w, rng);
  for (int i = 0; i < cfg_.sparse_blocks; ++i) enc_.push_back(add_block("enc" + std::to_string(i), rng));
  grid_ = GridNet(store_, "grid", cfg_.inner_res, w, cfg_.channel_mults, e, rng, z);
  for (int i = 0; i < cfg_.sparse_blocks; ++i) dec_.push_back(add_block("dec" + std::to_string(i), rng));
  out_ = add_linear(store_, "out", w, cfg_.channels, rng, z);
  inner_coords_ = grid_coords(RegularGrid::square(cfg_.inner_res));
}

Denoiser::SparseBlock Denoiser::add_block(const std::string& name, Rng& rng) {
  const int w = cfg_.width;
  const int cells = cfg_.kernel_size * cfg_.kernel_size;
  SparseBlock b;
  b.kernel = store_.size();
  Mat k(cells, w);
  for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = rng.normal();
  store_.add(name + ".conv.k", std::move(k));
  b.bias = store_.size();
  store_.add(name + ".conv.b", Mat::Zero(1, w));
  b.norm = add_modnorm(store_, name + ".norm", cfg_.time_dim, w, rng);
  b.mlp1 = add_linear(store_, name + ".mlp1", w, w, rng);
  b.mlp2 = add_linear(store_, name + ".mlp2", w, w, rng);
  b.mlp3 = add_linear(store_, name + ".mlp3", w, w, rng, cfg_.zero_init);
  return b;
}

Geometry Denoiser::prepare(const Mat& coords, const std::optional<RegularGrid>& grid) const {
  if (coords.cols() != 2) throw Error("denoiser: coordinates must be 2D");
  if (coords.rows() < cfg_.knn) {
    throw Error("denoiser: " + std::to_string(coords.rows()) + " coordinates, fewer than k = " +
                std::to_string(cfg_.knn) + " needed for interpolation");
  }
  Geometry g;
  g.coords = coords;
  g.kernel_eff = cfg_.kernel_size;
  if (grid && grid->rank() == 2 && grid->dims[0] == grid->dims[1] && grid->dims[0] != cfg_.train_res) {
    const double px = cfg_.radius() * grid->dims[0];
    const double r = std::round(px);
    if (r >= 1.0 && std::abs(px - r) < 1e-9) {
      g.kernel_eff = 2 * static_cast<int>(r) + 1;
      g.resize = std::make_shared<const Mat>(kernel_resize_matrix(cfg_.kernel_size, g.kernel_eff, 2));
    }
  }
  g.stencil = std::make_shared<const ConvStencil>(build_stencil(coords, cfg_.radius(), g.kernel_eff));
  g.down = std::make_shared<const InterpWeights>(knn_weights(coords, inner_coords_, cfg_.knn));
  g.up = std::make_shared<const InterpWeights>(knn_weights(inner_coords_, coords, cfg_.knn));
  return g;
}

Var Denoiser::block(grad::Tape& tape, const Geometry& geom, const SparseBlock& b, Var x, Var temb_act) const {
  Var k = tape.param(store_.at(b.kernel));
  if (geom.resize) k = grad::matmul(tape.constant(*geom.resize), k);
  Var h = grad::sparse_depthwise_conv(x, k, geom.stencil);
  h = grad::add_row(h, tape.param(store_.at(b.bias)));
  h = apply_modnorm(tape, store_, b.norm, h, temb_act);
  h = grad::silu(apply_linear(tape, store_, b.mlp1, h));
  h = grad::silu(apply_linear(tape, store_, b.mlp2, h));
  h = apply_linear(tape, store_, b.mlp3, h);
  return grad::add(x, h);
}

Var Denoiser::forward(grad::Tape& tape, const Geometry& geom, Var x, int t) const {
  if (static_cast<std::size_t>(x.rows()) != geom.points() || x.cols() != cfg_.channels) {
    throw Error("denoiser: input must be points x channels");
  }
  Var temb = tape.constant(timestep_features(t, cfg_.time_dim));
  temb = apply_linear(tape, store_, time1_, temb);
  temb = apply_linear(tape, store_, time2_, grad::silu(temb));
  Var temb_act = grad::silu(temb);

  Var h = apply_linear(tape, store_, lift_, x);
  std::vector<Var> skips;
  for (const auto& b : enc_) {
    h = block(tape, geom, b, h, temb_act);
    skips.push_back(h);
  }
  Var g = grid_.forward(tape, store_, grad::interpolate(h, geom.down), temb_act);
  h = grad::add(h, grad::interpolate(g, geom.up));
  for (std::size_t i = 0; i < dec_.size(); ++i) {
    h = grad::add(h, skips[skips.size() - 1 - i]);
    h = block(tape, geom, dec_[i], h, temb_act);
  }
  return apply_linear(tape, store_, out_, h);
}

Mat Denoiser::predict(const Geometry& geom, const Mat& x, int t) const {
  grad::Tape tape(false);
  return forward(tape, geom, tape.constant(x), t).value();
}

}  // namespace hdiff
