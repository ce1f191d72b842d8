#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "dcat/metrics.hpp"
#include "dcat/training.hpp"

namespace oracle {

// Counts tp/fp/fn per class straight from the pairs, no matrix.
inline dcat::MetricsReport brute_metrics(std::span<const int> preds, std::span<const int> labels,
                                         std::size_t classes) {
  dcat::MetricsReport r;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  for (std::size_t k = 0; k < classes; ++k) {
    const int c = static_cast<int>(k);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i] == c && labels[i] == c) ++tp;
      if (preds[i] == c && labels[i] != c) ++fp;
      if (preds[i] != c && labels[i] == c) ++fn;
    }
    dcat::ClassMetrics m;
    if (tp + fp) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
    r.per_class.push_back(m);
  }
  const double n = static_cast<double>(classes);
  r.macro_precision /= n;
  r.macro_recall /= n;
  r.macro_f1 /= n;
  r.accuracy = preds.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(preds.size());
  return r;
}

// Per-channel DFT magnitudes of the min-max normalized window. Invariant to
// the random start time of each recording.
inline std::vector<double> spectrum(const dcat::Signal& raw) {
  const dcat::Signal x = dcat::min_max_normalize(raw);
  std::vector<double> f;
  const double n = static_cast<double>(x.length);
  for (std::size_t c = 0; c < x.channels; ++c)
    for (std::size_t k = 1; k <= x.length / 2; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t t = 0; t < x.length; ++t) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(k * t) / n;
        re += x.at(t, c) * std::cos(a);
        im -= x.at(t, c) * std::sin(a);
      }
      f.push_back(std::hypot(re, im) / n);
    }
  return f;
}

// Nearest class centroid in spectrum space, fitted on `train`.
inline double nearest_centroid_accuracy(std::span<const dcat::PairedSample> train,
                                        std::span<const dcat::PairedSample> test, dcat::Modality m,
                                        std::size_t classes) {
  std::vector<std::vector<double>> centroid(classes);
  std::vector<double> count(classes, 0.0);
  for (const auto& s : train) {
    const auto f = spectrum(dcat::view(s, m));
    auto& c = centroid[static_cast<std::size_t>(s.label)];
    if (c.empty()) c.assign(f.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) c[i] += f[i];
    count[static_cast<std::size_t>(s.label)] += 1.0;
  }
  for (std::size_t k = 0; k < classes; ++k)
    for (auto& v : centroid[k]) v /= count[k];
  std::size_t correct = 0;
  for (const auto& s : test) {
    const auto f = spectrum(dcat::view(s, m));
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t k = 0; k < classes; ++k) {
      if (centroid[k].empty()) continue;
      double d = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) d += (f[i] - centroid[k][i]) * (f[i] - centroid[k][i]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    correct += static_cast<int>(best) == s.label;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace oracle
