#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dcat/metrics.hpp"

namespace dcat {

/// Transfer weights swept by the ablation.
inline const std::vector<double> kDefaultLambdaGrid = {0.01, 0.1, 1.0, 10.0};

/// Outcome of one (lambda, direction, seed) transfer run.
struct AblationCell {
  double lambda = 0.0;
  std::string direction;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

struct MeanSpread {
  double mean = 0.0;
  double spread = 0.0;  // sample standard deviation; 0 for a single seed
};

struct AblationRow {
  double lambda = 0.0;
  std::string direction;
  std::size_t seeds = 0;
  MeanSpread accuracy, recall, precision, f1;
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

/// One row per (lambda, direction), in grid order. Throws std::runtime_error
/// listing every absent (lambda, direction, seed) cell.
AblationTable build_ablation(const std::vector<AblationCell>& cells,
                             const std::vector<double>& lambdas,
                             const std::vector<std::string>& directions,
                             const std::vector<std::uint64_t>& seeds);

MeanSpread mean_spread(const std::vector<double>& xs);

/// Tab-separated table: direction, lambda, seeds, then mean/std per metric.
void write_tsv(std::ostream& out, const AblationTable& table);

}  // namespace dcat
