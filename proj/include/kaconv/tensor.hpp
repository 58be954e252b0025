#pragma once

// Dense double-precision tensors with reverse-mode differentiation. A Tensor
// is a value-semantic handle onto a shared node (value + optional gradient
// accumulator); ops append backward rules to a Tape, and Tape::backward
// replays them in reverse execution order, which is a valid topological
// order by construction.

#include <functional>
#include <memory>

#include "kaconv/common.hpp"

namespace kaconv {

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from_array(Shape shape, ArrayX data, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  Index ndim() const { return static_cast<Index>(shape().size()); }
  Index dim(Index axis) const { return shape()[static_cast<size_t>(axis)]; }
  Index numel() const;

  ArrayX& value();
  const ArrayX& value() const;
  Scalar item() const;  // value of a one-element tensor

  bool requires_grad() const;  // leaf parameter flag
  bool tracked() const;        // leaf or derived from one during recording
  void set_tracked(bool tracked);

  bool has_grad() const;
  ArrayX& grad();
  const ArrayX& grad() const;
  void accumulate_grad(const ArrayX& delta);
  void zero_grad();

  // Node identity (shared across copies of the handle).
  const void* node_id() const { return node_.get(); }

 private:
  struct Node {
    Shape shape;
    ArrayX value;
    ArrayX grad;  // empty until first accumulation
    bool requires_grad = false;
    bool tracked = false;
    bool grad_allocated = false;
  };

  std::shared_ptr<Node> node_;
};

class Tape {
 public:
  bool recording() const { return enabled_; }
  void set_enabled(bool enabled) { enabled_ = enabled; }

  void record(std::function<void()> backward_rule);
  size_t size() const { return rules_.size(); }
  void clear() { rules_.clear(); }

  // Seeds d(loss)/d(loss) = 1, runs all recorded rules in reverse, then
  // clears the tape. Gradients accumulate into every tracked tensor.
  void backward(const Tensor& loss);

 private:
  std::vector<std::function<void()>> rules_;
  bool enabled_ = true;
};

}  // namespace kaconv
