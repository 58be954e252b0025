#include "kaconv/adam.hpp"

#include <cmath>

namespace kaconv {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const Tensor& p : params_)
    require(p.defined() && p.requires_grad(), ErrorKind::invalid_argument,
            "Adam parameters must be trainable leaf tensors");
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (const Tensor& p : params_) {
    first_moment_.push_back(ArrayX::Zero(p.numel()));
    second_moment_.push_back(ArrayX::Zero(p.numel()));
  }
}

void Adam::step() {
  ++step_count_;
  const Scalar t = static_cast<Scalar>(step_count_);
  const Scalar correction1 = 1.0 - std::pow(options_.beta1, t);
  const Scalar correction2 = 1.0 - std::pow(options_.beta2, t);
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    require(p.has_grad(), ErrorKind::invalid_state,
            "Adam step with a missing gradient");
    const ArrayX& g = p.grad();
    require(g.allFinite(), ErrorKind::numeric_failure,
            "non-finite gradient in Adam step");
    ArrayX& m = first_moment_[i];
    ArrayX& v = second_moment_[i];
    m = options_.beta1 * m + (1.0 - options_.beta1) * g;
    v = options_.beta2 * v + (1.0 - options_.beta2) * g.square();
    const ArrayX m_hat = m / correction1;
    const ArrayX v_hat = v / correction2;
    if (options_.weight_decay != 0.0)
      p.value() -= options_.lr * options_.weight_decay * p.value();
    p.value() -= options_.lr * m_hat / (v_hat.sqrt() + options_.eps);
    require(p.value().allFinite(), ErrorKind::numeric_failure,
            "non-finite parameter after Adam step");
    p.zero_grad();
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace kaconv
