#include "hdiff/grid_net.hpp"

namespace hdiff {

using grad::Var;

GridNet::GridNet(grad::ParamStore& store, const std::string& prefix, int res, int width, std::vector<int> mults,
                 int embed, Rng& rng, bool zero_init)
    : res_(res) {
  if (mults.empty()) throw Error("grid net: channel_mults must be nonempty");
  const int levels = static_cast<int>(mults.size());
  if (res % (1 << (levels - 1)) != 0) throw Error("grid net: inner_res must be divisible by 2^(levels-1)");
  for (int m : mults) {
    if (m < 1) throw Error("grid net: channel multipliers must be positive");
    channels_.push_back(width * m);
  }
  for (int i = 0; i < levels; ++i) {
    const std::string lvl = prefix + ".l" + std::to_string(i);
    enc_.push_back(add_block(store, lvl + ".enc", channels_[i], embed, rng, zero_init));
    if (i + 1 < levels) down_.push_back(add_linear(store, lvl + ".down", channels_[i], channels_[i + 1], rng));
  }
  for (int i = levels - 1; i >= 0; --i) {
    const std::string lvl = prefix + ".l" + std::to_string(i);
    dec_.push_back(add_block(store, lvl + ".dec", channels_[i], embed, rng, zero_init));
    if (i > 0) up_.push_back(add_linear(store, lvl + ".up", channels_[i], channels_[i - 1], rng));
  }
  out_ = add_conv3x3(store, prefix + ".out", channels_[0], channels_[0], rng, zero_init);
}

GridNet::ResBlock GridNet::add_block(grad::ParamStore& store, const std::string& name, int channels, int embed,
                                     Rng& rng, bool zero_init) {
  ResBlock b;
  b.norm1 = add_modnorm(store, name + ".norm1", embed, channels, rng);
  b.conv1 = add_conv3x3(store, name + ".conv1", channels, channels, rng);
  b.norm2 = add_modnorm(store, name + ".norm2", embed, channels, rng);
  b.conv2 = add_conv3x3(store, name + ".conv2", channels, channels, rng, zero_init);
  return b;
}

Var GridNet::block(grad::Tape& tape, const grad::ParamStore& store, const ResBlock& b, Var x, int side,
                   Var temb_act) const {
  Var h = grad::silu(apply_modnorm(tape, store, b.norm1, x, temb_act));
  h = apply_conv3x3(tape, store, b.conv1, h, side, side);
  h = grad::silu(apply_modnorm(tape, store, b.norm2, h, temb_act));
  h = apply_conv3x3(tape, store, b.conv2, h, side, side);
  return grad::add(x, h);
}

Var GridNet::forward(grad::Tape& tape, const grad::ParamStore& store, Var x, Var temb_act) const {
  const auto levels = channels_.size();
  if (x.rows() != static_cast<Eigen::Index>(res_) * res_ || x.cols() != channels_[0]) {
    throw Error("grid net: input must be res^2 x width");
  }
  std::vector<Var> skips;
  int side = res_;
  Var h = x;
  for (std::size_t i = 0; i < levels; ++i) {
    h = block(tape, store, enc_[i], h, side, temb_act);
    skips.push_back(h);
    if (i + 1 < levels) {
      h = apply_linear(tape, store, down_[i], grad::avg_pool2(h, side, side));
      side /= 2;
    }
  }
  for (std::size_t j = 0; j < levels; ++j) {
    const std::size_t i = levels - 1 - j;
    // The deepest level's skip is its own encoder output.
    if (j > 0) h = grad::add(h, skips[i]);
    h = block(tape, store, dec_[j], h, side, temb_act);
    if (i > 0) {
      h = grad::upsample2(apply_linear(tape, store, up_[j], h), side, side);
      side *= 2;
    }
  }
  return apply_conv3x3(tape, store, out_, h, side, side);
}

}  // namespace hdiff
