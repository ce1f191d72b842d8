#include <gtest/gtest.h>

#include <cmath>

#include "dcat/gradcheck.hpp"
#include "dcat/ops.hpp"
#include "helpers.hpp"

using namespace dcat;
using testing_util::max_abs_diff;
using testing_util::naive_matmul;
using testing_util::random;

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = random({4, 3}, rng), b = random({3, 2}, rng);
    Tensor c = matmul(a, b);
    ASSERT_EQ(c.shape(), (Shape{4, 2}));
    EXPECT_LE(max_abs_diff(c.values(), naive_matmul(a, b)), 1e-15);
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  try {
    (void)matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Softmax, MatchesScalarOracle) {
  Rng rng(2);
  Tensor x = Tensor::uniform({3, 4}, -3, 3, rng);
  Tensor y = softmax_rows(x);
  for (std::size_t r = 0; r < 3; ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < 4; ++c) z += std::exp(x.at(r, c));
    double row = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_NEAR(y.at(r, c), std::exp(x.at(r, c)) / z, 1e-14);
      row += y.at(r, c);
    }
    EXPECT_NEAR(row, 1.0, 1e-14);
  }
}

TEST(Softmax, LargeLogitsStayFinite) {
  Tensor x({1, 3}, {1000.0, 1001.0, 999.0});
  const Tensor y = softmax_rows(x);
  for (double v : y.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Frobenius, MatchesScalarOracle) {
  Rng rng(3);
  Tensor x = random({5, 5}, rng);
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  EXPECT_NEAR(frobenius_norm(x).item(), std::sqrt(s), 1e-14);
}

TEST(Transpose, Involution) {
  Rng rng(4);
  Tensor x = random({3, 5}, rng);
  Tensor t = transpose(x);
  EXPECT_EQ(t.shape(), (Shape{5, 3}));
  EXPECT_EQ(max_abs_diff(transpose(t).values(), x.values()), 0.0);
}

TEST(Gradcheck, SquaredNorm) {
  Rng rng(5);
  Tensor x = random({4, 3}, rng, true);
  const double err = finite_diff_check(
      [](const Tensor& v) {
        Tensor n = frobenius_norm(v);
        return multiply(n, n);
      },
      x);
  EXPECT_LE(err, 1e-8);
}

TEST(Gradcheck, AttentionPipeline) {
  Rng rng(6);
  Tensor q = random({3, 4}, rng, true), k = random({3, 4}, rng, true), v = random({3, 4}, rng, true);
  auto f = [&] {
    Tensor s = softmax_rows(scale(matmul(q, transpose(k)), 0.5));
    return sum(multiply(matmul(s, v), matmul(s, v)));
  };
  EXPECT_LE(finite_diff_check(f, {q, k, v}).max_relative_error, 1e-5);
}

TEST(Gradcheck, FlagsWrongGradient) {
  Rng rng(8);
  Tensor x = random({3, 3}, rng, true);
  // backward sees only half of d/dx sum(x*x)
  const auto r = finite_diff_check([&] { return sum(multiply(x, x.detach())); }, {x});
  EXPECT_NEAR(r.max_relative_error, 0.5, 1e-6);
}

TEST(Gradcheck, SmallEntriesJudgedAgainstInputScale) {
  Rng rng(9);
  Tensor x = random({1, 4}, rng, true);
  Tensor w = Tensor::zeros({1, 4});
  const double weights[] = {1.0, 1e-7, -2.0, 3e-8};
  std::copy(std::begin(weights), std::end(weights), w.mutable_values().begin());
  const auto r = finite_diff_check([&] { return sum(multiply(w, multiply(x, x))); }, {x});
  EXPECT_LE(r.max_relative_error, 1e-8);
}

TEST(Autodiff, LeafGradientsAccumulate) {
  Tensor x({1, 2}, {1.0, 2.0}, true);
  sum(x).backward();
  sum(scale(x, 3.0)).backward();
  ASSERT_TRUE(x.has_grad());
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
  x.clear_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Autodiff, SharedSubexpression) {
  // d/dx of (x*x + x) at x=3 is 7
  Tensor x = Tensor::scalar(3.0, true);
  add(multiply(x, x), x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Autodiff, TapeIsTopological) {
  Rng rng(7);
  Tensor a = random({2, 2}, rng, true), b = random({2, 2}, rng, true);
  Tensor y = sum(relu(add(matmul(a, b), a)));
  Tape tape = record_tape(y);
  ASSERT_FALSE(tape.nodes.empty());
  EXPECT_EQ(tape.nodes.back(), y.node());
  for (std::size_t i = 0; i < tape.nodes.size(); ++i)
    for (const auto& in : tape.nodes[i]->inputs) {
      auto pos = std::find(tape.nodes.begin(), tape.nodes.end(), in);
      if (pos != tape.nodes.end()) EXPECT_LT(static_cast<std::size_t>(pos - tape.nodes.begin()), i);
    }
}

TEST(Autodiff, NoGradBuildsNoGraph) {
  Tensor x = Tensor::filled({2, 2}, 1.0, true);
  Tensor y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    y = matmul(x, x);
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(y.is_leaf());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Autodiff, DetachCutsGraph) {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = multiply(x.detach(), x);
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
}

TEST(Ops, ClampMinPassesGradientAboveFloor) {
  Tensor x({1, 3}, {-1.0, 0.5, 2.0}, true);
  sum(clamp_min(x, 0.0)).backward();
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 1.0);
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(Ops, DropoutIdentityInEval) {
  Rng rng(8);
  Tensor x = random({4, 4}, rng);
  EXPECT_EQ(max_abs_diff(dropout(x, 0.5, false, rng).values(), x.values()), 0.0);
  EXPECT_EQ(max_abs_diff(dropout(x, 0.0, true, rng).values(), x.values()), 0.0);
}

TEST(Ops, DropoutKeepsExpectation) {
  Rng rng(9);
  Tensor x = Tensor::filled({200, 200}, 1.0);
  double mean = 0.0;
  const Tensor y = dropout(x, 0.3, true, rng);
  for (double v : y.values()) mean += v;
  mean /= 40000.0;
  EXPECT_NEAR(mean, 1.0, 0.02);
}

TEST(Ops, UnfoldTimeLayout) {
  // one segment, T=4, C=1, kernel 2, stride 2 -> rows [0,1], [2,3]
  Tensor x({4, 1}, {0, 1, 2, 3});
  Tensor u = unfold_time(x, 1, 2, 2);
  ASSERT_EQ(u.shape(), (Shape{2, 2}));
  EXPECT_EQ(u.at(0, 0), 0.0);
  EXPECT_EQ(u.at(0, 1), 1.0);
  EXPECT_EQ(u.at(1, 0), 2.0);
  EXPECT_EQ(u.at(1, 1), 3.0);
}

TEST(Ops, PoolTime) {
  Tensor x({4, 1}, {1, 5, -2, 0});
  EXPECT_EQ(pool_time(x, 1, 2, PoolKind::max).values()[0], 5.0);
  EXPECT_EQ(pool_time(x, 1, 2, PoolKind::max).values()[1], 0.0);
  EXPECT_EQ(pool_time(x, 1, 2, PoolKind::mean).values()[1], -1.0);
}

TEST(Ops, BatchNormTrainStatistics) {
  Rng rng(10);
  Tensor x = Tensor::uniform({16, 5}, -4, 7, rng);
  auto bn = batch_norm_train(x, Tensor::filled({1, 5}, 1.0), Tensor::zeros({1, 5}), 1e-5);
  for (std::size_t c = 0; c < 5; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t r = 0; r < 16; ++r) m += bn.output.at(r, c);
    m /= 16;
    for (std::size_t r = 0; r < 16; ++r) v += (bn.output.at(r, c) - m) * (bn.output.at(r, c) - m);
    v /= 16;
    EXPECT_LE(std::abs(m), 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
}

TEST(Ops, ConcatAndSliceRoundTrip) {
  Rng rng(11);
  Tensor a = random({2, 3}, rng), b = random({3, 3}, rng);
  Tensor c = concat_rows({a, b});
  EXPECT_EQ(max_abs_diff(slice_rows(c, 2, 3).values(), b.values()), 0.0);
  EXPECT_THROW((void)slice_rows(c, 4, 2), ShapeError);
}
