#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "dcat/datagen.hpp"

using namespace dcat;

namespace {

DatasetConfig small() {
  DatasetConfig c;
  c.classes = 4;
  c.subjects = 6;
  c.samples_per_cell = 5;
  return c;
}

std::set<int> subjects_of(const std::vector<PairedSample>& xs) {
  std::set<int> s;
  for (const auto& x : xs) s.insert(x.subject_id);
  return s;
}

}  // namespace

TEST(Generate, SameSeedIdentical) {
  auto a = generate(small()), b = generate(small());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].raw_a, b[i].raw_a);
    EXPECT_EQ(a[i].raw_b, b[i].raw_b);
    EXPECT_EQ(a[i].label, b[i].label);
  }
}

TEST(Generate, DifferentSeedDiffers) {
  auto c = small();
  c.seed = 8;
  EXPECT_FALSE(generate(small())[0].raw_a == generate(c)[0].raw_a);
}

TEST(Generate, BalancedCounts) {
  auto c = small();
  auto d = generate(c);
  EXPECT_EQ(d.size(), c.classes * c.subjects * c.samples_per_cell);
  std::map<int, int> per_class;
  for (const auto& s : d) per_class[s.label]++;
  for (const auto& [_, n] : per_class) EXPECT_EQ(n, 30);
  EXPECT_EQ(d.front().raw_a.channels, c.channels_a);
  EXPECT_EQ(d.front().raw_b.channels, c.channels_b);
  EXPECT_EQ(d.front().raw_a.length, c.length);
}

TEST(Generate, NoiselessViewsDependOnlyOnClassAndSubject) {
  auto c = small();
  c.snr_a = c.snr_b = std::numeric_limits<double>::infinity();
  c.frequency_jitter = c.amplitude_jitter = 0.0;
  c.time_jitter = 0.0;
  auto d = generate(c);
  std::map<std::pair<int, int>, const PairedSample*> first;
  for (const auto& s : d) {
    auto [it, fresh] = first.emplace(std::make_pair(s.label, s.subject_id), &s);
    if (!fresh) {
      EXPECT_EQ(s.raw_a, it->second->raw_a);
      EXPECT_EQ(s.raw_b, it->second->raw_b);
    }
  }
}

TEST(Generate, RejectsInvalidCounts) {
  auto c = small();
  c.classes = 1;
  EXPECT_THROW((void)generate(c), std::invalid_argument);
  c = small();
  c.snr_b = 0.0;
  EXPECT_THROW((void)generate(c), std::invalid_argument);
}

TEST(Split, IdSizes) {
  auto c = small();
  c.classes = 10;
  c.subjects = 10;
  c.samples_per_cell = 10;
  auto d = generate(c);
  ASSERT_EQ(d.size(), 1000u);
  auto s = split(d, SplitSpec{});
  EXPECT_NEAR(static_cast<double>(s.train.size()), 800.0, 1.0);
  EXPECT_NEAR(static_cast<double>(s.val.size()), 100.0, 1.0);
  EXPECT_NEAR(static_cast<double>(s.test.size()), 100.0, 1.0);
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 1000u);
}

TEST(Split, IdStratified) {
  auto d = generate(small());
  auto s = split(d, SplitSpec{});
  std::map<int, int> per_class;
  for (const auto& x : s.train) per_class[x.label]++;
  for (const auto& [_, n] : per_class) EXPECT_NEAR(n, 0.8 * 30, 1.0);
}

TEST(Split, OodSubjectsDisjoint) {
  SplitSpec spec;
  spec.kind = SplitKind::ood;
  spec.train = 0.6;
  spec.val = 0.2;
  spec.test = 0.2;
  auto s = split(generate(small()), spec);
  auto tr = subjects_of(s.train), va = subjects_of(s.val), te = subjects_of(s.test);
  ASSERT_FALSE(tr.empty() || va.empty() || te.empty());
  for (int x : va) EXPECT_FALSE(tr.count(x));
  for (int x : te) EXPECT_FALSE(tr.count(x) || va.count(x));
}

TEST(Split, OodNeedsThreeSubjects) {
  auto c = small();
  c.subjects = 2;
  SplitSpec spec;
  spec.kind = SplitKind::ood;
  EXPECT_THROW((void)split(generate(c), spec), std::invalid_argument);
}

TEST(Split, RatiosMustSumToOne) {
  SplitSpec spec;
  spec.train = 0.5;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(Window, Starts) {
  EXPECT_EQ(window_starts(130, 70, 30), (std::vector<std::size_t>{0, 30, 60}));
  EXPECT_EQ(window_starts(140, 70, 70), (std::vector<std::size_t>{0, 70}));
  EXPECT_THROW((void)window_starts(60, 70, 70), std::invalid_argument);
}

TEST(Window, PairedChildrenKeepAlignment) {
  auto d = generate(small());
  auto kids = window(d[3], 70, 35);
  ASSERT_EQ(kids.size(), 3u);
  for (std::size_t i = 0; i < kids.size(); ++i) {
    EXPECT_EQ(kids[i].parent_id, d[3].sample_id);
    EXPECT_EQ(kids[i].sample_id, d[3].sample_id * 1000 + i);
    EXPECT_EQ(kids[i].label, d[3].label);
    EXPECT_EQ(kids[i].raw_a.at(0, 0), d[3].raw_a.at(35 * i, 0));
    EXPECT_EQ(kids[i].raw_b.at(5, 1), d[3].raw_b.at(35 * i + 5, 1));
  }
}

TEST(Normalize, MinMax) {
  Signal s(3, 2);
  s.at(0, 0) = 2;
  s.at(1, 0) = 4;
  s.at(2, 0) = 6;
  for (std::size_t t = 0; t < 3; ++t) s.at(t, 1) = 5;
  Signal n = min_max_normalize(s);
  EXPECT_EQ(n.at(0, 0), -1.0);
  EXPECT_EQ(n.at(1, 0), 0.0);
  EXPECT_EQ(n.at(2, 0), 1.0);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(n.at(t, 1), 0.0);
}

TEST(Normalize, ExtremesExact) {
  auto d = generate(small());
  Signal n = min_max_normalize(d[0].raw_b);
  for (std::size_t c = 0; c < n.channels; ++c) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t t = 0; t < n.length; ++t) {
      lo = std::min(lo, n.at(t, c));
      hi = std::max(hi, n.at(t, c));
    }
    EXPECT_EQ(lo, -1.0);
    EXPECT_EQ(hi, 1.0);
  }
}

TEST(SplitKindText, RoundTrip) {
  EXPECT_EQ(split_kind_from_string(to_string(SplitKind::ood)), SplitKind::ood);
  EXPECT_EQ(split_kind_from_string(to_string(SplitKind::id)), SplitKind::id);
  EXPECT_THROW((void)split_kind_from_string("both"), std::invalid_argument);
}
