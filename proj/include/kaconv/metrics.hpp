#pragma once

// Classification metrics: accuracy, per-class precision/recall/F1 with
// supports, weighted F1, and the confusion matrix (rows = true class,
// columns = predicted class).

#include <string>
#include <vector>

#include "kaconv/common.hpp"

namespace kaconv {

struct MetricsReport {
  Scalar accuracy = 0.0;
  Scalar weighted_f1 = 0.0;
  std::vector<Scalar> precision;
  std::vector<Scalar> recall;
  std::vector<Scalar> f1;
  std::vector<Index> support;
  std::vector<std::vector<Index>> confusion;
  std::vector<std::string> labels;
};

// truth/predicted hold class indices into `labels`. F1 of a class with
// P + R = 0 is defined as 0.
MetricsReport compute_metrics(const std::vector<int32_t>& truth,
                              const std::vector<int32_t>& predicted,
                              const std::vector<std::string>& labels);

}  // namespace kaconv
