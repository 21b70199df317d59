#include "hdiff/grad/tape.hpp"

namespace hdiff::grad {

Parameter& ParamStore::add(std::string name, Mat value) {
  if (index_.count(name)) throw Error("duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  Mat grad = Mat::Zero(value.rows(), value.cols());
  params_.push_back(Parameter{std::move(name), std::move(value), std::move(grad)});
  return params_.back();
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

const Mat& Var::value() const { return tape_->value(id_); }
const Mat& Var::grad() const { return tape_->grad_or_empty(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

int Tape::push(Mat value, bool requires_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(backward)});
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::constant(Mat value) { return {this, push(std::move(value), false, nullptr)}; }

Var Tape::input(Mat value, bool requires_grad) { return {this, push(std::move(value), requires_grad, nullptr)}; }

Var Tape::param(const Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return {this, it->second};
  const int id = push(p.value, params_require_grad_, nullptr);
  param_nodes_.emplace(&p, id);
  return {this, id};
}

Var Tape::record(Mat value, std::initializer_list<Var> inputs, Backward backward) {
  bool rg = false;
  for (const Var& v : inputs) {
    if (v.tape() != this) throw Error("primitive inputs belong to a different tape");
    rg = rg || requires_grad(v.id());
  }
  return {this, push(std::move(value), rg, rg ? std::move(backward) : Backward{})};
}

Mat& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.value().rows() != 1 || loss.value().cols() != 1) throw Error("backward: loss must be a scalar");
  backward(loss, Mat::Ones(1, 1));
}

void Tape::backward(Var output, const Mat& seed) {
  if (output.tape() != this) throw Error("backward: output belongs to a different tape");
  const Mat& v = value(output.id());
  if (seed.rows() != v.rows() || seed.cols() != v.cols()) throw Error("backward: seed shape mismatch");
  grad(output.id()) += seed;
  propagate(output.id());
}

void Tape::propagate(int from) {
  for (int id = from; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, id);
  }
}

std::vector<Mat> Tape::param_grads(const ParamStore& store) const {
  std::vector<Mat> out;
  out.reserve(store.size());
  for (const Parameter& p : store) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end() && has_grad(it->second)) {
      out.push_back(grad_or_empty(it->second));
    } else {
      out.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    }
  }
  return out;
}

void Tape::accumulate_into(ParamStore& store) const {
  for (Parameter& p : store) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end() && has_grad(it->second)) p.grad += grad_or_empty(it->second);
  }
}

std::size_t Tape::memory_bytes() const {
  std::size_t b = 0;
  for (const Node& n : nodes_) b += sizeof(double) * static_cast<std::size_t>(n.value.size() + n.grad.size());
  return b;
}

}  // namespace hdiff::grad
