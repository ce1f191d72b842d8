#pragma once

#include <cstddef>
#include <vector>

#include "dcat/tensor.hpp"

namespace dcat {

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);

/// x + row, with the 1xn row repeated down every row of x.
Tensor add_row(const Tensor& x, const Tensor& row);

/// x / s for a 1x1 tensor s.
Tensor divide_by_scalar(const Tensor& x, const Tensor& s);

/// max(x, floor) elementwise; the gradient is passed only where x > floor.
Tensor clamp_min(const Tensor& x, double floor);

/// Inverted dropout. Identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

// Reductions
Tensor sum(const Tensor& x);
Tensor mean_over_rows(const Tensor& x);
Tensor frobenius_norm(const Tensor& x);

/// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& x);

// Row slicing and stacking
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);

// Sequence ops. A batch of `segments` sequences is stored as a
// (segments*T) x C matrix, sequence n occupying rows [n*T, (n+1)*T).

/// Gathers sliding windows so that a 1-D convolution becomes a matmul:
/// output row (n, t) holds input rows n*T + t*stride .. + kernel-1 concatenated,
/// giving a (segments*T') x (kernel*C) matrix with T' = (T - kernel)/stride + 1.
Tensor unfold_time(const Tensor& x, std::size_t segments, std::size_t kernel,
                   std::size_t stride);

enum class PoolKind { max, mean };

/// Non-overlapping pooling over time with window `width` (stride = width).
Tensor pool_time(const Tensor& x, std::size_t segments, std::size_t width, PoolKind kind);

/// Per-column batch normalization using the statistics of x itself.
struct BatchNormResult {
  Tensor output;
  std::vector<double> mean;
  std::vector<double> variance;  // biased
};
BatchNormResult batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                 double eps);

/// Per-column normalization with fixed statistics.
Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       const std::vector<double>& mean, const std::vector<double>& variance,
                       double eps);

}  // namespace dcat
