#pragma once

#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "maint/optim.hpp"
#include "maint/tensor.hpp"

namespace maint {

struct EmptyDistributionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Score at or below this sentinel is treated as masked: its softmax weight is
// exactly zero.
constexpr double kMaskSentinel = -1e30;
constexpr double kMaskThreshold = -1e29;

constexpr double kLogEps = 1e-12;

// Reverse-mode tape. Records every differentiable operation in execution
// order; backward() replays it in reverse and accumulates into Parameter
// gradients. Single-threaded per tape.
class Tape {
 public:
  using Var = int;
  static constexpr Var kNone = -1;

  Var constant(Tensor t);
  Var scalar(double v) { return constant(Tensor::scalar(v)); }

  // Trainable leaf: backward adds this node's gradient into p.grad.
  Var param(Parameter& p);

  // One row of a 2-D parameter; gradient flows only to that row.
  Var param_row(Parameter& table, std::size_t row);

  // W x (+ b). W: m x n, x: n, b: m or kNone.
  Var linear(Var W, Var x, Var b = kNone);

  Var sigmoid(Var x);
  Var tanh_(Var x);
  // 1-D softmax; entries at or below the mask sentinel get weight exactly 0.
  Var softmax(Var x);

  // Parts may be 0-D (treated as length 1) or 1-D.
  Var concat(const std::vector<Var>& parts);

  Var add(Var a, Var b);   // elementwise, same shape
  Var mul(Var a, Var b);   // elementwise, same shape
  Var affine(Var x, double scale, double shift);  // scale*x + shift, elementwise
  Var scale_by(Var vec, Var scalar);              // vec * scalar(0-D)
  Var pick(Var vec, std::size_t i);               // 0-D element of a 1-D vec
  Var dot(Var a, Var b);                          // 0-D
  Var sum(Var x);                                 // 0-D

  // Inverted dropout: zero with probability rate, survivors scaled by
  // 1/(1-rate); identity when not training.
  Var dropout(Var x, double rate, bool training, std::mt19937_64& rng);

  // -log(probs[target] + kLogEps).
  Var cross_entropy(Var probs, std::size_t target);

  // Sum of squared entries over all params; backward writes 2*theta*g
  // straight into each parameter's gradient.
  Var l2_penalty(const std::vector<Parameter*>& params);

  // Seeds d(loss)/d(loss)=1 and sweeps the tape in reverse. Node-local
  // gradients are reset first, so repeated calls accumulate additively into
  // Parameter gradients.
  void backward(Var loss);

  const Tensor& value(Var v) const { return nodes_.at(check(v)).value; }
  const Tensor& grad(Var v) const { return nodes_.at(check(v)).grad; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;  // empty for constants
  };

  std::size_t check(Var v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= nodes_.size())
      throw TapeError("variable " + std::to_string(v) + " is not on this tape");
    return static_cast<std::size_t>(v);
  }

  Var push(Tensor value, std::function<void(Tape&)> back) {
    Node n;
    n.grad = Tensor::zeros_like(value);
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  Tensor& g(Var v) { return nodes_[static_cast<std::size_t>(v)].grad; }
  const Tensor& val(Var v) { return nodes_[static_cast<std::size_t>(v)].value; }

  std::vector<Node> nodes_;
};

}  // namespace maint
