#pragma once

#include "dcat/tensor.hpp"

namespace dcat {

struct LinearMapFit {
  Tensor map;       // k x k'
  double residual;  // ||y - x map||_F / max(||y||_F, eps)
};

/// Least-squares map minimizing ||y - x * map||_F, solved through the normal
/// equations (x^T x + ridge * mean(diag(x^T x)) I) map = x^T y.
LinearMapFit fit_linear_map(const Tensor& x, const Tensor& y, double ridge = 1e-13);

/// Numerical witness that two factorizations of one product are linked by
/// linear maps: A' ~ A R and B' ~ S B.
struct FactorizationWitness {
  Tensor a, b, a_prime, b_prime;
  Tensor r_hat;  // k x k'
  Tensor s_hat;  // k' x k
  double r_a = 0.0;
  double r_b = 0.0;
  double product_residual = 0.0;  // ||A'B' - AB||_F / max(||AB||_F, eps)
};

FactorizationWitness fit_factorization(const Tensor& a, const Tensor& b, const Tensor& a_prime,
                                       const Tensor& b_prime);

/// Applies fit_factorization with A = K_A^T, B = V_A, A' = K_B^T, B' = V_B:
/// measures how far the target keys and values are from linear maps of the
/// source keys and values.
FactorizationWitness verify_factorization(const Tensor& k_a, const Tensor& v_a,
                                          const Tensor& k_b, const Tensor& v_b);

}  // namespace dcat
