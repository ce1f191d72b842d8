#include "dcat/verification.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dcat/attention.hpp"
#include "dcat/factorization.hpp"
#include "dcat/gradcheck.hpp"
#include "dcat/losses.hpp"
#include "dcat/ops.hpp"

namespace dcat {

namespace {

constexpr double kGradTolerance = 1e-5;

Tensor leaf(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor::uniform(s, lo, hi, rng, true);
}

Tensor constant(Shape s, Rng& rng) { return Tensor::uniform(s, -1.0, 1.0, rng, false); }

// Scalarizes an op output with fixed random weights so every entry matters.
Tensor weighted(const Tensor& y, const Tensor& w) { return sum(multiply(y, w)); }

struct OpCase {
  std::string name;
  // Builds fresh random leaves and returns the scalar function over them.
  std::function<std::pair<std::function<Tensor()>, std::vector<Tensor>>(Rng&)> make;
};

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  auto unary = [&](std::string name, Shape in, Shape out, std::function<Tensor(const Tensor&)> op,
                   double lo = -1.0, double hi = 1.0) {
    cases.push_back({std::move(name), [=](Rng& rng) {
                       Tensor x = leaf(in, rng, lo, hi);
                       Tensor w = constant(out, rng);
                       return std::pair{std::function<Tensor()>([=] { return weighted(op(x), w); }),
                                        std::vector<Tensor>{x}};
                     }});
  };
  auto binary = [&](std::string name, Shape a, Shape b, Shape out,
                    std::function<Tensor(const Tensor&, const Tensor&)> op) {
    cases.push_back({std::move(name), [=](Rng& rng) {
                       Tensor x = leaf(a, rng);
                       Tensor y = leaf(b, rng);
                       Tensor w = constant(out, rng);
                       return std::pair{
                           std::function<Tensor()>([=] { return weighted(op(x, y), w); }),
                           std::vector<Tensor>{x, y}};
                     }});
  };

  binary("matmul", {4, 3}, {3, 5}, {4, 5}, matmul);
  unary("transpose", {3, 4}, {4, 3}, transpose);
  binary("add", {3, 4}, {3, 4}, {3, 4}, add);
  binary("subtract", {3, 4}, {3, 4}, {3, 4}, subtract);
  binary("multiply", {3, 4}, {3, 4}, {3, 4}, multiply);
  unary("scale", {3, 4}, {3, 4}, [](const Tensor& x) { return scale(x, -2.5); });
  unary("relu", {4, 5}, {4, 5}, relu);
  binary("add_row", {4, 3}, {1, 3}, {4, 3}, add_row);
  cases.push_back({"divide_by_scalar", [](Rng& rng) {
                     Tensor x = leaf({3, 3}, rng);
                     Tensor s = leaf({1, 1}, rng, 0.5, 2.0);
                     Tensor w = constant({3, 3}, rng);
                     return std::pair{std::function<Tensor()>(
                                          [=] { return weighted(divide_by_scalar(x, s), w); }),
                                      std::vector<Tensor>{x, s}};
                   }});
  unary("clamp_min", {3, 4}, {3, 4}, [](const Tensor& x) { return clamp_min(x, 0.1); });
  cases.push_back({"dropout", [](Rng& rng) {
                     Tensor x = leaf({5, 4}, rng);
                     Tensor w = constant({5, 4}, rng);
                     const std::uint64_t mask_seed = rng();
                     return std::pair{std::function<Tensor()>([=] {
                                        Rng fixed(mask_seed);
                                        return weighted(dropout(x, 0.5, true, fixed), w);
                                      }),
                                      std::vector<Tensor>{x}};
                   }});
  unary("sum", {3, 4}, {1, 1}, sum);
  unary("mean_over_rows", {5, 3}, {1, 3}, mean_over_rows);
  unary("frobenius_norm", {4, 4}, {1, 1}, frobenius_norm);
  unary("softmax_rows", {3, 5}, {3, 5}, softmax_rows, -3.0, 3.0);
  unary("slice_rows", {6, 3}, {2, 3}, [](const Tensor& x) { return slice_rows(x, 3, 2); });
  binary("concat_rows", {2, 3}, {4, 3}, {6, 3},
         [](const Tensor& a, const Tensor& b) { return concat_rows({a, b}); });
  unary("unfold_time", {2 * 9, 3}, {2 * 4, 9},
        [](const Tensor& x) { return unfold_time(x, 2, 3, 2); });
  unary("max_pool", {2 * 8, 3}, {2 * 4, 3},
        [](const Tensor& x) { return pool_time(x, 2, 2, PoolKind::max); });
  unary("mean_pool", {2 * 8, 3}, {2 * 4, 3},
        [](const Tensor& x) { return pool_time(x, 2, 2, PoolKind::mean); });
  cases.push_back({"batch_norm_train", [](Rng& rng) {
                     Tensor x = leaf({8, 3}, rng);
                     Tensor g = leaf({1, 3}, rng, 0.5, 1.5);
                     Tensor b = leaf({1, 3}, rng);
                     Tensor w = constant({8, 3}, rng);
                     return std::pair{std::function<Tensor()>([=] {
                                        return weighted(batch_norm_train(x, g, b, 1e-5).output, w);
                                      }),
                                      std::vector<Tensor>{x, g, b}};
                   }});
  cases.push_back({"batch_norm_eval", [](Rng& rng) {
                     Tensor x = leaf({6, 3}, rng);
                     Tensor g = leaf({1, 3}, rng, 0.5, 1.5);
                     Tensor b = leaf({1, 3}, rng);
                     Tensor w = constant({6, 3}, rng);
                     const std::vector<double> mean{0.1, -0.2, 0.3}, var{0.5, 1.5, 2.0};
                     return std::pair{std::function<Tensor()>([=] {
                                        return weighted(batch_norm_eval(x, g, b, mean, var, 1e-5), w);
                                      }),
                                      std::vector<Tensor>{x, g, b}};
                   }});
  cases.push_back({"cross_entropy", [](Rng& rng) {
                     Tensor logits = leaf({4, 5}, rng, -2.0, 2.0);
                     std::vector<int> labels(4);
                     for (auto& l : labels) l = static_cast<int>(rng() % 5);
                     return std::pair{std::function<Tensor()>(
                                          [=] { return cross_entropy(logits, labels); }),
                                      std::vector<Tensor>{logits}};
                   }});
  cases.push_back({"self_attention", [](Rng& rng) {
                     Tensor k = leaf({5, 4}, rng), q = leaf({5, 4}, rng), v = leaf({5, 4}, rng);
                     Tensor w = constant({5, 4}, rng);
                     return std::pair{std::function<Tensor()>([=] {
                                        return weighted(self_attention({k, q, v}), w);
                                      }),
                                      std::vector<Tensor>{k, q, v}};
                   }});
  cases.push_back({"cross_attention", [](Rng& rng) {
                     Tensor q = leaf({4, 3}, rng), k = leaf({6, 3}, rng), v = leaf({6, 3}, rng);
                     Tensor w = constant({4, 3}, rng);
                     return std::pair{std::function<Tensor()>([=] {
                                        return weighted(cross_attention(q, k, v), w);
                                      }),
                                      std::vector<Tensor>{q, k, v}};
                   }});
  binary("signature", {5, 3}, {5, 3}, {3, 3},
         [](const Tensor& k, const Tensor& v) { return signature(k, v).sig; });
  unary("normalize_frobenius", {3, 3}, {3, 3},
        [](const Tensor& m) { return normalize_frobenius({m}, 1e-12).sig; });
  cases.push_back({"cross_attention_loss", [](Rng& rng) {
                     Tensor b = leaf({4, 4}, rng);
                     AttentionSignature a{constant({4, 4}, rng)};
                     return std::pair{std::function<Tensor()>(
                                          [=] { return cross_attention_loss({b}, a); }),
                                      std::vector<Tensor>{b}};
                   }});
  cases.push_back({"masked_cross_attention_loss", [](Rng& rng) {
                     std::vector<Tensor> bs;
                     std::vector<AttentionSignature> as;
                     for (int i = 0; i < 3; ++i) {
                       bs.push_back(leaf({3, 3}, rng));
                       as.push_back({constant({3, 3}, rng)});
                     }
                     CorrectnessMask mask{{1, 0, 1}};
                     return std::pair{std::function<Tensor()>([=] {
                                        std::vector<AttentionSignature> sb;
                                        for (const auto& b : bs) sb.push_back({b});
                                        return masked_cross_attention_loss(sb, as, mask);
                                      }),
                                      bs};
                   }});
  return cases;
}

// Full objective over per-sample embeddings: projection, self-attention, mean pooling,
// linear head, cross-entropy and masked alignment against fixed source triples.
CheckResult combined_objective_check(std::uint64_t seed) {
  constexpr std::size_t batch = 4, sl = 8, d_model = 16, d_out = 8, classes = 3;
  Rng rng(seed);
  std::vector<Tensor> embeddings;
  for (std::size_t i = 0; i < batch; ++i) embeddings.push_back(leaf({sl, d_model}, rng));
  ProjectionWeights w = ProjectionWeights::init(d_model, d_out, rng);
  Tensor head_w = leaf({d_out, classes}, rng);
  Tensor head_b = leaf({1, classes}, rng);
  std::vector<AttentionSignature> source;
  for (std::size_t i = 0; i < batch; ++i) {
    source.push_back(signature(constant({sl, d_out}, rng), constant({sl, d_out}, rng)));
  }
  const std::vector<int> labels{0, 2, 1, 2};
  const CorrectnessMask mask{{1, 1, 0, 1}};
  LossConfig cfg;
  cfg.lambda = 1.0;

  auto objective = [=]() {
    std::vector<Tensor> pooled;
    std::vector<AttentionSignature> target;
    for (const auto& e : embeddings) {
      const AttentionTriple t = project(e, w);
      pooled.push_back(mean_over_rows(self_attention(t)));
      target.push_back(signature(t.k, t.v));
    }
    Tensor logits = add_row(matmul(concat_rows(pooled), head_w), head_b);
    Tensor ce = cross_entropy(logits, labels);
    Tensor ca = masked_cross_attention_loss(target, source, mask, cfg);
    return total_loss(ce, ca, mask.count(), cfg).total;
  };
  std::vector<Tensor> inputs = embeddings;
  inputs.insert(inputs.end(), {w.w_k, w.w_q, w.w_v, head_w, head_b});
  const auto report = finite_diff_check(objective, inputs);
  std::ostringstream detail;
  detail << "worst input " << report.worst_input << " index " << report.worst_index
         << " analytic " << report.analytic << " numeric " << report.numeric;
  return {"grad.combined_objective", report.max_relative_error <= kGradTolerance,
          report.max_relative_error, kGradTolerance, detail.str()};
}

// Whole classifier in training mode (batch-norm batch statistics, no dropout).
CheckResult classifier_check(std::uint64_t seed) {
  Rng rng(seed);
  ModelConfig mc;
  mc.encoder.in_channels = 2;
  mc.encoder.stages = {{StageKind::conv, 3, 1, 4}, {StageKind::max_pool, 2, 2, 0},
                       {StageKind::conv, 3, 1, 4}};
  mc.d_out = 4;
  mc.classes = 3;
  ModalityClassifier model(mc, rng);
  std::vector<Signal> windows(3, Signal(12, 2));
  for (auto& s : windows) {
    for (auto& v : s.values) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  }
  std::vector<const Signal*> batch;
  for (const auto& s : windows) batch.push_back(&s);
  const std::vector<int> labels{0, 1, 2};
  std::vector<Tensor> inputs;
  for (const auto& p : model.parameters()) inputs.push_back(p.tensor);
  auto objective = [&]() {
    Rng unused(0);
    return cross_entropy(model.forward(batch, unused).logits, labels);
  };
  const auto report = finite_diff_check(objective, inputs);
  return {"grad.classifier", report.max_relative_error <= kGradTolerance,
          report.max_relative_error, kGradTolerance,
          "worst parameter " + model.parameters()[report.worst_input].name};
}

}  // namespace

nlohmann::json to_json(const CheckResult& r) {
  return {{"name", r.name},
          {"passed", r.passed},
          {"value", r.value},
          {"threshold", r.threshold},
          {"detail", r.detail}};
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

std::vector<CheckResult> gradient_checks(std::uint64_t seed, std::size_t trials) {
  std::vector<CheckResult> out;
  Rng rng(seed);
  for (const auto& c : op_cases()) {
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      auto [f, inputs] = c.make(rng);
      worst = std::max(worst, finite_diff_check(f, inputs).max_relative_error);
    }
    out.push_back({"grad." + c.name, worst <= kGradTolerance, worst, kGradTolerance,
                   std::to_string(trials) + " random inputs"});
  }
  out.push_back(combined_objective_check(rng()));
  out.push_back(classifier_check(rng()));
  return out;
}

std::vector<CheckResult> loss_invariant_checks(std::uint64_t seed, std::size_t pairs) {
  Rng rng(seed);
  std::vector<CheckResult> out;
  double self = 0.0;
  double scaled = 0.0;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t n = 2 + rng() % 7;
    const AttentionSignature a{Tensor::uniform({n, n}, -1.0, 1.0, rng)};
    const AttentionSignature b{Tensor::uniform({n, n}, -1.0, 1.0, rng)};
    self = std::max(self, cross_attention_loss(a, a).item());
    for (double c : {0.5, 2.0, 10.0}) {
      scaled = std::max(scaled, cross_attention_loss({scale(a.sig, c)}, a).item());
    }
    const double l = cross_attention_loss(b, a).item();
    if (i == 0) lo = hi = l;
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  out.push_back({"loss.identity", self <= 1e-12, self, 1e-12, "max L_CA(M, M)"});
  out.push_back({"loss.scale_invariance", scaled <= 1e-12, scaled, 1e-12,
                 "max L_CA(cM, M) for c in {0.5, 2, 10}"});
  std::ostringstream range;
  range << "range [" << lo << ", " << hi << "] over " << pairs << " random pairs";
  out.push_back({"loss.bounds", lo >= 0.0 && hi <= 2.0, hi, 2.0, range.str()});
  return out;
}

CheckResult loss_bookkeeping_check(const std::vector<LossBreakdown>& steps, double tolerance) {
  double worst = 0.0;
  for (const auto& s : steps) worst = std::max(worst, std::abs(s.total - (s.l_ce + s.lambda * s.l_ca)));
  return {"loss.bookkeeping", worst <= tolerance, worst, tolerance,
          std::to_string(steps.size()) + " steps"};
}

std::vector<CheckResult> factorization_recovery_checks(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
  };
  auto to_tensor = [](const Eigen::MatrixXd& m) {
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v));
  };

  double worst_a = 0.0, worst_b = 0.0, worst_p = 0.0;
  for (std::size_t n = 0; n < instances; ++n) {
    Eigen::MatrixXd a = random(6, 4);
    while (Eigen::FullPivLU<Eigen::MatrixXd>(a).rank() < 4) a = random(6, 4);
    Eigen::MatrixXd r = random(4, 4) + 2.0 * Eigen::MatrixXd::Identity(4, 4);
    const Eigen::MatrixXd b = random(4, 6);
    const Eigen::MatrixXd a_prime = a * r;
    const Eigen::MatrixXd b_prime = r.inverse() * b;
    const auto w = fit_factorization(to_tensor(a), to_tensor(b), to_tensor(a_prime), to_tensor(b_prime));
    worst_a = std::max(worst_a, w.r_a);
    worst_b = std::max(worst_b, w.r_b);
    worst_p = std::max(worst_p, w.product_residual);
  }
  const std::string detail = std::to_string(instances) + " constructed instances";
  return {{"factorization.r_a", worst_a <= 1e-8, worst_a, 1e-8, detail},
          {"factorization.r_b", worst_b <= 1e-8, worst_b, 1e-8, detail},
          {"factorization.product", worst_p <= 1e-12, worst_p, 1e-12, detail}};
}

}  // namespace dcat
