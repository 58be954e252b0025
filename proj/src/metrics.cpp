#include "kaconv/metrics.hpp"

namespace kaconv {

MetricsReport compute_metrics(const std::vector<int32_t>& truth,
                              const std::vector<int32_t>& predicted,
                              const std::vector<std::string>& labels) {
  require(truth.size() == predicted.size(), ErrorKind::invalid_argument,
          "truth and prediction counts differ");
  require(!truth.empty(), ErrorKind::invalid_argument,
          "metrics need at least one example");
  const Index n_classes = static_cast<Index>(labels.size());
  for (int32_t t : truth)
    require(t >= 0 && t < n_classes, ErrorKind::invalid_argument,
            "class index out of range in truth");
  for (int32_t p : predicted)
    require(p >= 0 && p < n_classes, ErrorKind::invalid_argument,
            "class index out of range in predictions");

  MetricsReport report;
  report.labels = labels;
  report.confusion.assign(static_cast<size_t>(n_classes),
                          std::vector<Index>(static_cast<size_t>(n_classes), 0));
  for (size_t i = 0; i < truth.size(); ++i)
    ++report.confusion[static_cast<size_t>(truth[i])]
                      [static_cast<size_t>(predicted[i])];

  Index correct = 0;
  report.precision.resize(static_cast<size_t>(n_classes));
  report.recall.resize(static_cast<size_t>(n_classes));
  report.f1.resize(static_cast<size_t>(n_classes));
  report.support.resize(static_cast<size_t>(n_classes));
  for (Index c = 0; c < n_classes; ++c) {
    Index true_positive = report.confusion[c][c];
    Index row_total = 0, col_total = 0;
    for (Index other = 0; other < n_classes; ++other) {
      row_total += report.confusion[c][other];
      col_total += report.confusion[other][c];
    }
    correct += true_positive;
    report.support[c] = row_total;
    const Scalar precision =
        col_total > 0 ? static_cast<Scalar>(true_positive) / col_total : 0.0;
    const Scalar recall =
        row_total > 0 ? static_cast<Scalar>(true_positive) / row_total : 0.0;
    report.precision[c] = precision;
    report.recall[c] = recall;
    report.f1[c] = precision + recall > 0.0
                       ? 2.0 * precision * recall / (precision + recall)
                       : 0.0;
  }
  const Scalar total = static_cast<Scalar>(truth.size());
  report.accuracy = static_cast<Scalar>(correct) / total;
  for (Index c = 0; c < n_classes; ++c)
    report.weighted_f1 +=
        (static_cast<Scalar>(report.support[c]) / total) * report.f1[c];
  return report;
}

}  // namespace kaconv
