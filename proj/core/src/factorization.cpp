#include "dcat/factorization.hpp"

#include <Eigen/Dense>
#include <algorithm>

namespace dcat {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kResidualFloor = 1e-300;

Matrix to_eigen(const Tensor& t) {
  return Eigen::Map<const Matrix>(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                                  static_cast<Eigen::Index>(t.cols()));
}

Tensor from_eigen(const Matrix& m) {
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                std::vector<double>(m.data(), m.data() + m.size()));
}

double relative(double num, double den) { return num / std::max(den, kResidualFloor); }

}  // namespace

LinearMapFit fit_linear_map(const Tensor& x, const Tensor& y, double ridge) {
  if (x.rows() != y.rows()) {
    throw ShapeError("fit_linear_map: " + to_string(x.shape()) + " and " + to_string(y.shape()) +
                     " have different row counts");
  }
  const Matrix X = to_eigen(x);
  const Matrix Y = to_eigen(y);
  Matrix gram = X.transpose() * X;
  const double scale = gram.diagonal().mean();
  gram.diagonal().array() += ridge * (scale > 0.0 ? scale : 1.0);
  const Matrix map = gram.ldlt().solve(X.transpose() * Y);
  const double residual = relative((Y - X * map).norm(), Y.norm());
  return {from_eigen(map), residual};
}

FactorizationWitness fit_factorization(const Tensor& a, const Tensor& b, const Tensor& a_prime,
                                       const Tensor& b_prime) {
  if (a.rows() != a_prime.rows() || b.cols() != b_prime.cols() || a.cols() != b.rows() ||
      a_prime.cols() != b_prime.rows()) {
    throw ShapeError("fit_factorization: incompatible factors A" + to_string(a.shape()) + " B" +
                     to_string(b.shape()) + " A'" + to_string(a_prime.shape()) + " B'" +
                     to_string(b_prime.shape()));
  }
  NoGradGuard guard;
  FactorizationWitness w;
  w.a = a.detach();
  w.b = b.detach();
  w.a_prime = a_prime.detach();
  w.b_prime = b_prime.detach();

  const auto fit_a = fit_linear_map(w.a, w.a_prime);
  w.r_hat = fit_a.map;
  w.r_a = fit_a.residual;

  // B' = S B  <=>  B'^T = B^T S^T
  const Matrix B = to_eigen(w.b);
  const Matrix Bp = to_eigen(w.b_prime);
  const auto fit_b = fit_linear_map(from_eigen(B.transpose()), from_eigen(Bp.transpose()));
  w.s_hat = from_eigen(to_eigen(fit_b.map).transpose());
  w.r_b = fit_b.residual;

  const Matrix ab = to_eigen(w.a) * B;
  const Matrix apbp = to_eigen(w.a_prime) * Bp;
  w.product_residual = relative((apbp - ab).norm(), ab.norm());
  return w;
}

FactorizationWitness verify_factorization(const Tensor& k_a, const Tensor& v_a,
                                          const Tensor& k_b, const Tensor& v_b) {
  const Matrix ka = to_eigen(k_a);
  const Matrix kb = to_eigen(k_b);
  return fit_factorization(from_eigen(ka.transpose()), v_a, from_eigen(kb.transpose()), v_b);
}

}  // namespace dcat
