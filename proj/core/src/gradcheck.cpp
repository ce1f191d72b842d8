#include "dcat/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dcat {

GradCheckReport finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                                  double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  for (auto& x : inputs) {
    if (!x.is_leaf() || !x.requires_grad()) {
      throw std::invalid_argument("finite_diff_check: inputs must be leaves requiring grad");
    }
    x.clear_grad();
  }
  const Tensor y = f();
  backward(y);

  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& x = inputs[k];
    const std::vector<double> analytic =
        x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end())
                     : std::vector<double>(x.size(), 0.0);
    auto values = x.mutable_values();
    double scale = 1e-8, worst_diff = -1.0;
    std::size_t worst = 0;
    double worst_numeric = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard guard;
        values[i] = saved + h;
        plus = f().item();
        values[i] = saved - h;
        minus = f().item();
      }
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric)});
      const double diff = std::abs(analytic[i] - numeric);
      if (diff > worst_diff) {
        worst_diff = diff;
        worst = i;
        worst_numeric = numeric;
      }
    }
    if (values.empty()) continue;
    const double err = worst_diff / scale;
    if (err > report.max_relative_error || k == 0) {
      report = {err, k, worst, analytic[worst], worst_numeric};
    }
  }
  return report;
}

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double h) {
  Tensor leaf = x;
  return finite_diff_check([&] { return f(leaf); }, {leaf}, h).max_relative_error;
}

}  // namespace dcat
