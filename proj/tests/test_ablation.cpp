#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dcat/ablation.hpp"

using namespace dcat;

namespace {

AblationCell cell(double lambda, std::uint64_t seed, double f1) {
  AblationCell c;
  c.lambda = lambda;
  c.direction = "A->B";
  c.seed = seed;
  c.metrics.macro_f1 = f1;
  c.metrics.accuracy = f1;
  return c;
}

}  // namespace

TEST(MeanSpread, SampleStd) {
  auto ms = mean_spread({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(ms.mean, 2.0);
  EXPECT_DOUBLE_EQ(ms.spread, 1.0);
  EXPECT_EQ(mean_spread({4.0}).spread, 0.0);
}

TEST(Ablation, GridTimesSeeds) {
  std::vector<AblationCell> cells;
  for (double l : kDefaultLambdaGrid)
    for (std::uint64_t s : {1, 2, 3}) cells.push_back(cell(l, s, 0.5 + 0.01 * static_cast<double>(s)));
  ASSERT_EQ(cells.size(), 12u);
  auto t = build_ablation(cells, kDefaultLambdaGrid, {"A->B"}, {1, 2, 3});
  ASSERT_EQ(t.rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(t.rows[i].lambda, kDefaultLambdaGrid[i]);
    EXPECT_EQ(t.rows[i].seeds, 3u);
    EXPECT_NEAR(t.rows[i].f1.mean, 0.52, 1e-12);
  }
  std::ostringstream os;
  write_tsv(os, t);
  std::size_t lines = 0;
  for (char c : os.str()) lines += c == '\n';
  EXPECT_EQ(lines, 5u);
}

TEST(Ablation, MissingCellsListed) {
  std::vector<AblationCell> cells{cell(0.01, 1, 0.5), cell(0.1, 1, 0.5)};
  try {
    (void)build_ablation(cells, {0.01, 0.1}, {"A->B"}, {1, 2});
    FAIL();
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("seed=2"), std::string::npos) << msg;
  }
}
