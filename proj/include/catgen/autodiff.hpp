#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace catgen::ad {

using Matrix = Eigen::MatrixXd;
/// Row-major boolean mask; true = blocked.
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named trainable tensor.
struct Parameter {
  std::string name;
  Matrix value;
  bool trainable = true;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// tape is alive.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Per-parameter gradients produced by Tape::backward.
class Gradients {
 public:
  /// Throws std::out_of_range ("parameter not on tape") when `p` was never
  /// recorded on the tape that produced these gradients.
  const Matrix& of(const Parameter& p) const;
  bool contains(const Parameter& p) const { return grads_.count(&p) != 0; }
  const std::unordered_map<const Parameter*, Matrix>& all() const { return grads_; }

 private:
  friend class Tape;
  std::unordered_map<const Parameter*, Matrix> grads_;
};

/// Reverse-mode recording of one forward computation. Each forward pass owns
/// its tape; there is no global state.
class Tape {
 public:
  /// Accumulates contributions into the inputs of a node, given the node's own
  /// value and the gradient flowing into it.
  using BackwardFn = std::function<void(Tape&, const Matrix& out, const Matrix& grad_out)>;

  /// With gradients disabled nothing is retained for the backward pass.
  explicit Tape(bool enable_grad = true) : enable_grad_(enable_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Records a parameter leaf by reference; `p` must outlive the tape.
  /// Non-trainable parameters behave as constants.
  Var parameter(const Parameter& p);

  /// Adds a node whose value was computed from `inputs`. `backward` is dropped
  /// when no input requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  const Matrix& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external != nullptr ? *n.external : n.value;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  void accumulate(std::size_t id, const Matrix& grad);

  /// Back-propagates from a 1x1 `loss`.
  Gradients backward(Var loss);

  /// Largest |entry| over every recorded value (diagnostics).
  double max_abs_value() const;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    const Parameter* param = nullptr;
    const Matrix* external = nullptr;
  };
  bool enable_grad_ = true;
  std::vector<Node> nodes_;
};

// Linear algebra
Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds a 1 x n row to every row of a.
Var add_row(Var a, Var row);
Var mul(Var a, Var b);
Var scale(Var a, double s);

// Elementwise nonlinearities
/// tanh approximation of GELU.
Var gelu(Var a);
Var exp(Var a);
/// Gradient passes only where lo < a < hi.
Var clamp(Var a, double lo, double hi);
Var square(Var a);

/// Row-wise layer normalization with affine gain/bias rows.
Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
/// Row-wise softmax restricted to unblocked entries; blocked entries are
/// exactly zero (logit -inf). Every row must have at least one open entry.
Var masked_softmax(Var logits, const BoolMatrix& blocked);

// Shape
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var a, std::vector<Eigen::Index> indices);

// Reductions to 1x1
Var sum(Var a);
Var mean(Var a);
/// mean((a - b)^2)
Var mse(Var a, Var b);

}  // namespace catgen::ad
