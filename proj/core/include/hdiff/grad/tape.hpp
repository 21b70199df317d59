#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <vector>

#include "hdiff/types.hpp"

namespace hdiff::grad {

/// A named trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
};

/// Ordered collection of parameters. Order is insertion order and defines
/// the checkpoint layout and gradient reduction order.
class ParamStore {
 public:
  Parameter& add(std::string name, Mat value);
  Parameter& at(std::size_t i) { return params_[i]; }
  const Parameter& at(std::size_t i) const { return params_[i]; }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  // Tapes key parameters by address; add() invalidates them.
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }
  const Mat& value() const;
  const Mat& grad() const;
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Linear record of executed primitives. Node ids are assigned in execution
/// order, so reverse id order is a valid topological order for backward.
class Tape {
 public:
  /// Adjoint rule: reads the node's grad and accumulates into its inputs.
  using Backward = std::function<void(Tape&, int self)>;

  /// With params_require_grad = false, parameter leaves are constants and
  /// only input() leaves can carry gradients.
  explicit Tape(bool params_require_grad = true) : params_require_grad_(params_require_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  Var input(Mat value, bool requires_grad);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(const Parameter& p);

  /// Records a primitive. The node requires grad iff any input does; the
  /// adjoint is dropped otherwise.
  Var record(Mat value, std::initializer_list<Var> inputs, Backward backward);

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() > 0; }
  /// Gradient slot, zero-allocated on first access.
  Mat& grad(int id);
  const Mat& grad_or_empty(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  /// Seeds d loss / d loss = 1 for a 1x1 loss and propagates.
  void backward(Var loss);
  /// Seeds an arbitrary output cotangent and propagates.
  void backward(Var output, const Mat& seed);

  /// Gradients of every parameter in `store`, zeros for unused ones.
  std::vector<Mat> param_grads(const ParamStore& store) const;
  /// Adds this tape's parameter gradients into the store's grad slots.
  void accumulate_into(ParamStore& store) const;

  std::size_t size() const { return nodes_.size(); }
  /// Bytes held by recorded values and gradients.
  std::size_t memory_bytes() const;

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Backward backward;
  };
  int push(Mat value, bool requires_grad, Backward backward);
  void propagate(int from);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool params_require_grad_ = true;
};

}  // namespace hdiff::grad
