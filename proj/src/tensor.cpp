#include "kaconv/tensor.hpp"

namespace kaconv {

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from_array(std::move(shape), ArrayX(), requires_grad);
}

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
  const Index n = shape_numel(shape);
  ArrayX data = ArrayX::Constant(n, value);
  return from_array(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_array(Shape shape, ArrayX data, bool requires_grad) {
  const Index n = shape_numel(shape);
  require(n >= 0, ErrorKind::invalid_argument, "negative tensor extent");
  if (data.size() == 0 && n > 0) data = ArrayX::Zero(n);
  require(data.size() == n, ErrorKind::invalid_argument,
          "data length " + std::to_string(data.size()) +
              " does not match shape " + shape_str(shape));
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->value = std::move(data);
  t.node_->requires_grad = requires_grad;
  t.node_->tracked = requires_grad;
  if (requires_grad) {
    t.node_->grad = ArrayX::Zero(n);
    t.node_->grad_allocated = true;
  }
  return t;
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

const Shape& Tensor::shape() const {
  require(defined(), ErrorKind::invalid_state, "use of an undefined tensor");
  return node_->shape;
}

Index Tensor::numel() const { return node_->value.size(); }

ArrayX& Tensor::value() {
  require(defined(), ErrorKind::invalid_state, "use of an undefined tensor");
  return node_->value;
}

const ArrayX& Tensor::value() const {
  require(defined(), ErrorKind::invalid_state, "use of an undefined tensor");
  return node_->value;
}

Scalar Tensor::item() const {
  require(numel() == 1, ErrorKind::invalid_argument,
          "item() requires a one-element tensor, shape is " +
              shape_str(shape()));
  return value()[0];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }

bool Tensor::tracked() const { return defined() && node_->tracked; }

void Tensor::set_tracked(bool tracked) { node_->tracked = tracked; }

bool Tensor::has_grad() const { return defined() && node_->grad_allocated; }

ArrayX& Tensor::grad() {
  require(has_grad(), ErrorKind::invalid_state,
          "gradient requested but never populated");
  return node_->grad;
}

const ArrayX& Tensor::grad() const {
  require(has_grad(), ErrorKind::invalid_state,
          "gradient requested but never populated");
  return node_->grad;
}

void Tensor::accumulate_grad(const ArrayX& delta) {
  require(delta.size() == numel(), ErrorKind::invalid_argument,
          "gradient size mismatch");
  if (!node_->grad_allocated) {
    node_->grad = delta;
    node_->grad_allocated = true;
  } else {
    node_->grad += delta;
  }
}

void Tensor::zero_grad() {
  if (node_->grad_allocated) node_->grad.setZero();
}

void Tape::record(std::function<void()> backward_rule) {
  if (enabled_) rules_.push_back(std::move(backward_rule));
}

void Tape::backward(const Tensor& loss) {
  require(loss.defined() && loss.numel() == 1, ErrorKind::invalid_argument,
          "backward requires a scalar loss");
  require(!rules_.empty(), ErrorKind::invalid_state,
          "backward called on an empty tape");
  require(loss.tracked(), ErrorKind::invalid_state,
          "loss does not depend on any tracked tensor");
  const_cast<Tensor&>(loss).accumulate_grad(ArrayX::Ones(1));
  for (auto it = rules_.rbegin(); it != rules_.rend(); ++it) (*it)();
  clear();
}

}  // namespace kaconv
