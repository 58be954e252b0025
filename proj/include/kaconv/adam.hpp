#pragma once

// Bias-corrected Adam with optional decoupled weight decay (applied as
// p -= lr * wd * p, independent of the moment estimates; default 0).

#include <vector>

#include "kaconv/tensor.hpp"

namespace kaconv {

struct AdamOptions {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  Scalar weight_decay = 0.0;
};

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamOptions options = {});

  // One update from the accumulated gradients; zeroes them afterward.
  void step();
  void zero_grad();

  int64_t step_count() const { return step_count_; }
  const AdamOptions& options() const { return options_; }
  void set_lr(Scalar lr) { options_.lr = lr; }

 private:
  std::vector<Tensor> params_;
  std::vector<ArrayX> first_moment_;
  std::vector<ArrayX> second_moment_;
  int64_t step_count_ = 0;
  AdamOptions options_;
};

}  // namespace kaconv
