#pragma once

#include <cmath>
#include <vector>

#include "dcat/tensor.hpp"

namespace testing_util {

inline dcat::Tensor random(dcat::Shape s, dcat::Rng& rng, bool grad = false) {
  return dcat::Tensor::uniform(s, -1.0, 1.0, rng, grad);
}

// Triple-loop product on raw values.
inline std::vector<double> naive_matmul(const dcat::Tensor& a, const dcat::Tensor& b) {
  std::vector<double> out(a.rows() * b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a.at(i, k) * b.at(k, j);
      out[i * b.cols() + j] = acc;
    }
  return out;
}

inline double max_abs_diff(std::span<const double> x, std::span<const double> y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

}  // namespace testing_util
