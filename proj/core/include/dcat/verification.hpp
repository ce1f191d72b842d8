#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcat/training.hpp"

namespace dcat {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

nlohmann::json to_json(const CheckResult& r);
bool all_passed(const std::vector<CheckResult>& results);

/// Finite-difference checks (h = 1e-6) of every differentiable op over
/// `trials` random small inputs each, plus the combined objective graph
/// (batch 4, SL 8, d_model 16, d_out 8) and a full classifier forward.
std::vector<CheckResult> gradient_checks(std::uint64_t seed, std::size_t trials = 10);

/// Identity, positive-scale invariance and [0, 2] bounds of the alignment loss.
std::vector<CheckResult> loss_invariant_checks(std::uint64_t seed, std::size_t pairs = 1000);

/// total == l_ce + lambda * l_ca on every recorded step.
CheckResult loss_bookkeeping_check(const std::vector<LossBreakdown>& steps, double tolerance = 1e-12);

/// Constructed instances A' = A R, B' = R^-1 B (A 6x4, R 4x4, B 4x6); the
/// fitted maps must reproduce them.
std::vector<CheckResult> factorization_recovery_checks(std::uint64_t seed,
                                                       std::size_t instances = 100);

}  // namespace dcat
