#include "dcat/ablation.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace dcat {

MeanSpread mean_spread(const std::vector<double>& xs) {
  MeanSpread out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.spread = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

AblationTable build_ablation(const std::vector<AblationCell>& cells,
                             const std::vector<double>& lambdas,
                             const std::vector<std::string>& directions,
                             const std::vector<std::uint64_t>& seeds) {
  AblationTable table;
  std::vector<std::string> missing;
  for (const auto& dir : directions) {
    for (double lambda : lambdas) {
      std::vector<double> acc, rec, prec, f1;
      for (auto seed : seeds) {
        const AblationCell* found = nullptr;
        for (const auto& c : cells)
          if (c.lambda == lambda && c.direction == dir && c.seed == seed) found = &c;
        if (!found) {
          std::ostringstream os;
          os << "(lambda=" << lambda << ", direction=" << dir << ", seed=" << seed << ")";
          missing.push_back(os.str());
          continue;
        }
        acc.push_back(found->metrics.accuracy);
        rec.push_back(found->metrics.macro_recall);
        prec.push_back(found->metrics.macro_precision);
        f1.push_back(found->metrics.macro_f1);
      }
      table.rows.push_back({lambda, dir, acc.size(), mean_spread(acc), mean_spread(rec),
                            mean_spread(prec), mean_spread(f1)});
    }
  }
  if (!missing.empty()) {
    std::string msg = "ablation is missing " + std::to_string(missing.size()) + " run(s):";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
  return table;
}

void write_tsv(std::ostream& out, const AblationTable& table) {
  out << "direction\tlambda\tseeds\taccuracy\taccuracy_std\trecall\trecall_std\tprecision\t"
         "precision_std\tf1\tf1_std\n";
  out << std::setprecision(6) << std::fixed;
  for (const auto& r : table.rows) {
    out << r.direction << '\t' << std::defaultfloat << r.lambda << std::fixed << '\t' << r.seeds
        << '\t' << r.accuracy.mean << '\t' << r.accuracy.spread << '\t' << r.recall.mean << '\t'
        << r.recall.spread << '\t' << r.precision.mean << '\t' << r.precision.spread << '\t'
        << r.f1.mean << '\t' << r.f1.spread << '\n';
  }
}

}  // namespace dcat
