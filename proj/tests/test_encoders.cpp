#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "dcat/encoders.hpp"
#include "dcat/losses.hpp"
#include "dcat/training.hpp"
#include "helpers.hpp"

using namespace dcat;

namespace {

Signal noise_window(std::size_t t, std::size_t c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Signal s(t, c);
  for (auto& v : s.values) v = u(rng);
  return s;
}

ModelConfig small_model(std::size_t channels, std::size_t classes = 4) {
  ModelConfig cfg;
  cfg.encoder = EncoderConfig::imu_default(channels);
  cfg.d_out = 8;
  cfg.classes = classes;
  return cfg;
}

}  // namespace

TEST(Encoder, SingleStageLength) {
  EncoderConfig cfg;
  cfg.in_channels = 3;
  cfg.stages = {{StageKind::conv, 3, 1, 4}};
  EXPECT_EQ(cfg.output_length(70), 68u);
}

TEST(Encoder, DefaultStackShape) {
  // 70 -conv5-> 66 -pool2-> 33 -conv3-> 31 -conv3-> 29 -pool2-> 14
  auto cfg = EncoderConfig::imu_default(6);
  EXPECT_EQ(cfg.output_length(70), 14u);
  EXPECT_EQ(cfg.d_model(), 32u);
  Rng rng(1);
  ModalityEncoder enc(cfg, rng);
  enc.set_mode(Mode::eval);
  Tensor e = encode(noise_window(70, 6, rng), enc);
  EXPECT_EQ(e.shape(), (Shape{14, 32}));
}

TEST(Encoder, ShortWindowNamesStage) {
  auto cfg = EncoderConfig::imu_default(6);
  try {
    (void)cfg.output_length(8);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("stage"), std::string::npos);
  }
}

TEST(Encoder, ZeroInputFinite) {
  Rng rng(2);
  ModalityEncoder enc(EncoderConfig::imu_default(6), rng);
  Tensor zeros = Tensor::zeros({2 * 70, 6});
  const Tensor trained = enc.encode_batch(zeros, 2, rng);
  for (double v : trained.values()) EXPECT_TRUE(std::isfinite(v));
  enc.set_mode(Mode::eval);
  const Tensor evaluated = enc.encode_batch(zeros, 2);
  for (double v : evaluated.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Encoder, TrainingUpdatesRunningStatistics) {
  Rng rng(3);
  ModalityEncoder enc(EncoderConfig::imu_default(6), rng);
  const auto before = enc.buffers().front().tensor.detach();
  Tensor batch = Tensor::uniform({4 * 70, 6}, 2, 5, rng);
  (void)enc.encode_batch(batch, 4, rng);
  const auto after = enc.buffers().front().tensor;
  EXPECT_GT(testing_util::max_abs_diff(before.values(), after.values()), 0.0);
}

TEST(Classifier, EvalIsPure) {
  Rng rng(4);
  ModalityClassifier model(small_model(6), rng);
  model.set_mode(Mode::eval);
  Signal w = noise_window(70, 6, rng);
  auto l1 = model.classify(w);
  auto l2 = model.classify(w);
  EXPECT_EQ(l1.size(), 4u);
  EXPECT_EQ(l1, l2);
}

TEST(Classifier, BatchAndSingleAgree) {
  Rng rng(5);
  ModalityClassifier model(small_model(6), rng);
  model.set_mode(Mode::eval);
  Signal a = noise_window(70, 6, rng), b = noise_window(70, 6, rng);
  std::vector<const Signal*> batch{&a, &b};
  auto out = model.infer(batch);
  auto single = model.classify(b);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.logits.at(1, c), single[c], 1e-12);
}

TEST(Classifier, EveryParameterReceivesGradient) {
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    ModalityClassifier model(small_model(6), rng);
    std::vector<Signal> windows;
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) {
      windows.push_back(noise_window(70, 6, rng));
      labels.push_back(i % 4);
    }
    std::vector<const Signal*> batch;
    for (const auto& w : windows) batch.push_back(&w);
    auto out = model.forward(batch, rng);
    cross_entropy(out.logits, labels).backward();
    for (const auto& p : model.parameters()) {
      ASSERT_TRUE(p.tensor.has_grad()) << p.name;
      double mx = 0.0;
      for (double g : p.tensor.grad()) mx = std::max(mx, std::abs(g));
      EXPECT_GT(mx, 0.0) << p.name << " seed " << seed;
    }
  }
}

TEST(Classifier, UntrainedIsNearChance) {
  DatasetConfig dc;
  dc.classes = 4;
  dc.subjects = 5;
  dc.samples_per_cell = 10;
  auto windows = window_all(generate(dc), 70, 70);
  ASSERT_GE(windows.size(), 200u);
  Rng pick(11);
  std::shuffle(windows.begin(), windows.end(), pick);
  windows.resize(200);
  double mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    ModalityClassifier model(small_model(dc.channels_b), rng);
    model.set_mode(Mode::eval);
    mean += evaluate(model, Modality::b, windows, dc.classes).accuracy / 5.0;
  }
  EXPECT_NEAR(mean, 0.25, 0.15);
}

TEST(Classifier, CloneIsIndependent) {
  Rng rng(6);
  ModalityClassifier model(small_model(6), rng);
  ModalityClassifier copy = clone(model);
  copy.parameters().front().tensor.mutable_values()[0] += 1.0;
  EXPECT_NE(copy.parameters().front().tensor.values()[0], model.parameters().front().tensor.values()[0]);
}

TEST(Classifier, LoadStateRejectsMismatch) {
  Rng rng(7);
  ModalityClassifier a(small_model(6), rng), b(small_model(6, 5), rng);
  auto s = b.state();
  EXPECT_THROW(a.load_state(s), std::invalid_argument);
}
