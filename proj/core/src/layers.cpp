#include "hdiff/layers.hpp"

#include <cmath>

namespace hdiff {

using grad::Var;

namespace {

Mat gaussian(int rows, int cols, double stddev, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

}  // namespace

LinearLayer add_linear(grad::ParamStore& store, const std::string& name, int in, int out, Rng& rng, bool zero_init) {
  LinearLayer l;
  l.w = store.size();
  store.add(name + ".w", zero_init ? Mat::Zero(in, out) : gaussian(in, out, 1.0 / std::sqrt(in), rng));
  l.b = store.size();
  store.add(name + ".b", Mat::Zero(1, out));
  return l;
}

Var apply_linear(grad::Tape& tape, const grad::ParamStore& store, const LinearLayer& layer, Var x) {
  return grad::affine(x, tape.param(store.at(layer.w)), tape.param(store.at(layer.b)));
}

LinearLayer add_conv3x3(grad::ParamStore& store, const std::string& name, int in, int out, Rng& rng,
                        bool zero_init) {
  LinearLayer l;
  l.w = store.size();
  store.add(name + ".w", zero_init ? Mat::Zero(9 * in, out) : gaussian(9 * in, out, 1.0 / std::sqrt(9.0 * in), rng));
  l.b = store.size();
  store.add(name + ".b", Mat::Zero(1, out));
  return l;
}

Var apply_conv3x3(grad::Tape& tape, const grad::ParamStore& store, const LinearLayer& layer, Var x, int h, int w) {
  return grad::conv3x3(x, h, w, tape.param(store.at(layer.w)), tape.param(store.at(layer.b)));
}

ModNorm add_modnorm(grad::ParamStore& store, const std::string& name, int embed, int channels, Rng& rng) {
  // Small projection so modulation starts near the identity.
  ModNorm n;
  n.channels = channels;
  n.proj = add_linear(store, name + ".mod", embed, 2 * channels, rng);
  store.at(n.proj.w).value *= 0.1;
  return n;
}

Var apply_modnorm(grad::Tape& tape, const grad::ParamStore& store, const ModNorm& norm, Var x, Var temb_act) {
  Var ss = apply_linear(tape, store, norm.proj, temb_act);
  Var scale = grad::slice_cols(ss, 0, norm.channels);
  Var shift = grad::slice_cols(ss, norm.channels, norm.channels);
  return grad::modulate(grad::layer_norm(x), scale, shift);
}

}  // namespace hdiff
