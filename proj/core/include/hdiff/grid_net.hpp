#pragma once

#include <vector>

#include "hdiff/layers.hpp"

namespace hdiff {

/// Dense convolutional encoder-decoder on a square inner grid, channels-last.
///
/// Level i runs at res / 2^i with width * mults[i] channels. The encoder
/// applies a residual block per level and downsamples by 2x average pooling
/// followed by a channel-changing linear map; the decoder mirrors it with
/// nearest upsampling and additive skips. The output conv is zero-initialised
/// when requested, so the branch starts silent.
class GridNet {
 public:
  GridNet() = default;
  GridNet(grad::ParamStore& store, const std::string& prefix, int res, int width, std::vector<int> mults,
          int embed, Rng& rng, bool zero_init);

  /// x: (res * res) x width rows in row-major grid order.
  grad::Var forward(grad::Tape& tape, const grad::ParamStore& store, grad::Var x, grad::Var temb_act) const;

  int res() const { return res_; }

 private:
  struct ResBlock {
    ModNorm norm1;
    LinearLayer conv1;
    ModNorm norm2;
    LinearLayer conv2;
  };
  ResBlock add_block(grad::ParamStore& store, const std::string& name, int channels, int embed, Rng& rng,
                     bool zero_init);
  grad::Var block(grad::Tape& tape, const grad::ParamStore& store, const ResBlock& b, grad::Var x, int side,
                  grad::Var temb_act) const;

  int res_ = 0;
  std::vector<int> channels_;
  std::vector<ResBlock> enc_;
  std::vector<ResBlock> dec_;
  std::vector<LinearLayer> down_;  // level i -> i + 1
  std::vector<LinearLayer> up_;    // level i + 1 -> i
  LinearLayer out_;
};

}  // namespace hdiff
