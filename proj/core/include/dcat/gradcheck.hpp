#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dcat/tensor.hpp"

namespace dcat {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x+h e_i) - f(x-h e_i)) / 2h, coordinate by coordinate.
/// Per input, the relative error is the largest |analytic - numeric| over the
/// largest gradient magnitude of that input (at least 1e-8); the report keeps
/// the worst input.
///
/// `f` re-evaluates the whole graph from the current values of `inputs`;
/// it must be deterministic. Each input must be a leaf with requires_grad.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                                  double h = 1e-6);

/// Single-input form.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double h = 1e-6);

}  // namespace dcat
