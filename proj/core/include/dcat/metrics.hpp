#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dcat {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;  // classes x classes

  static ConfusionMatrix build(std::span<const int> preds, std::span<const int> labels,
                               std::size_t classes);
  [[nodiscard]] std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * classes + pred];
  }
  [[nodiscard]] std::uint64_t total() const;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
};

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

/// Accuracy plus unweighted class means of precision, recall and F1. A class
/// whose precision (or recall) denominator is zero scores 0 for that value.
MetricsReport macro_metrics(std::span<const int> preds, std::span<const int> labels,
                            std::size_t classes);

}  // namespace dcat
