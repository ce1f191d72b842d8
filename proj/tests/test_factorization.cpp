#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "dcat/factorization.hpp"
#include "dcat/ops.hpp"
#include "dcat/verification.hpp"
#include "helpers.hpp"

using namespace dcat;
using testing_util::random;

namespace {

Tensor from_eigen(const Eigen::MatrixXd& m) {
  std::vector<double> v;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, v);
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t.at(r, c);
  return m;
}

}  // namespace

TEST(LinearMap, RecoversConstructedMap) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random({10, 4}, rng), r = random({4, 3}, rng);
    auto fit = fit_linear_map(x, matmul(x, r));
    EXPECT_LE(fit.residual, 1e-8);
    EXPECT_LE(testing_util::max_abs_diff(fit.map.values(), r.values()), 1e-6);
  }
}

TEST(LinearMap, OrthogonalTargetResidualIsOne) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, 3);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  Eigen::MatrixXd q = qr.householderQ();
  // columns 3.. of Q span the orthogonal complement of col(x)
  Eigen::MatrixXd y = q.rightCols(5) * Eigen::MatrixXd::Random(5, 2);
  auto fit = fit_linear_map(from_eigen(x), from_eigen(y));
  EXPECT_NEAR(fit.residual, 1.0, 1e-8);
}

TEST(Factorization, ConstructedInstances) {
  std::srand(3);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 3);
    Eigen::MatrixXd r = Eigen::MatrixXd::Random(3, 3) + 2.0 * Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd b = Eigen::MatrixXd::Random(3, 4);
    Eigen::MatrixXd ap = a * r, bp = r.inverse() * b;
    auto w = fit_factorization(from_eigen(a), from_eigen(b), from_eigen(ap), from_eigen(bp));
    EXPECT_LE(w.product_residual, 1e-12);
    EXPECT_LE(w.r_a, 1e-10);
    EXPECT_LE(w.r_b, 1e-10);
    Eigen::MatrixXd rs = to_eigen(w.r_hat) * to_eigen(w.s_hat);
    EXPECT_LE((rs - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-8);
  }
}

TEST(Factorization, UnrelatedFactorsLeaveResidual) {
  Rng rng(4);
  auto w = fit_factorization(random({6, 2}, rng), random({2, 6}, rng), random({6, 2}, rng),
                             random({2, 6}, rng));
  EXPECT_GT(w.r_a, 1e-3);
  EXPECT_GT(w.r_b, 1e-3);
}

TEST(Factorization, RecoverySuitePasses) {
  for (const auto& r : factorization_recovery_checks(9, 100)) EXPECT_TRUE(r.passed) << r.name << " " << r.value;
}

TEST(Factorization, SignatureFormTransposesKeys) {
  Rng rng(5);
  Tensor k = random({5, 3}, rng), v = random({5, 3}, rng);
  auto w = verify_factorization(k, v, k, v);
  EXPECT_LE(w.r_a, 1e-8);
  EXPECT_LE(w.r_b, 1e-8);
  EXPECT_LE(w.product_residual, 1e-12);
}
