#include "dcat/metrics.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace dcat {

ConfusionMatrix ConfusionMatrix::build(std::span<const int> preds, std::span<const int> labels,
                                       std::size_t classes) {
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("metrics: " + std::to_string(preds.size()) + " predictions for " +
                                std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm{classes, std::vector<std::uint64_t>(classes * classes, 0)};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (int v : {preds[i], labels[i]}) {
      if (v < 0 || static_cast<std::size_t>(v) >= classes) {
        throw std::out_of_range("metrics: class " + std::to_string(v) + " outside [0, " +
                                std::to_string(classes) + ")");
      }
    }
    ++cm.counts[static_cast<std::size_t>(labels[i]) * classes + static_cast<std::size_t>(preds[i])];
  }
  return cm;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
  const std::size_t c = cm.classes;
  MetricsReport r;
  std::uint64_t trace = 0;
  for (std::size_t k = 0; k < c; ++k) {
    const std::uint64_t tp = cm.at(k, k);
    std::uint64_t predicted = 0, actual = 0;
    for (std::size_t j = 0; j < c; ++j) {
      predicted += cm.at(j, k);
      actual += cm.at(k, j);
    }
    ClassMetrics m;
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
    r.per_class.push_back(m);
    trace += tp;
  }
  const double n = static_cast<double>(c);
  r.macro_precision /= n;
  r.macro_recall /= n;
  r.macro_f1 /= n;
  const std::uint64_t total = cm.total();
  r.accuracy = total ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
  return r;
}

MetricsReport macro_metrics(std::span<const int> preds, std::span<const int> labels,
                            std::size_t classes) {
  return metrics_from_confusion(ConfusionMatrix::build(preds, labels, classes));
}

}  // namespace dcat
