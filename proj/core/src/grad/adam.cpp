#include "hdiff/grad/adam.hpp"

#include <cmath>

namespace hdiff::grad {

AdamState AdamState::zeros_like(const ParamStore& store, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const Parameter& p : store) {
    s.m.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    s.v.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  }
  return s;
}

void adam_step(ParamStore& params, AdamState& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error("adam_step: optimizer state does not match parameters");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params.at(i);
    Mat& m = state.m[i];
    Mat& v = state.v[i];
    m = c.beta1 * m + (1.0 - c.beta1) * p.grad;
    v = c.beta2 * v + (1.0 - c.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  }
}

}  // namespace hdiff::grad
