#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dcat/digest.hpp"
#include "dcat/training.hpp"

using namespace dcat;

namespace {

struct Tiny {
  std::vector<PairedSample> train, val;
  std::size_t classes = 3;
};

Tiny tiny_data() {
  DatasetConfig dc;
  dc.classes = 3;
  dc.subjects = 3;
  dc.samples_per_cell = 4;
  auto s = split(generate(dc), SplitSpec{});
  return {window_all(s.train, 70, 70), window_all(s.val, 70, 70), dc.classes};
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 8;
  c.d_out = 8;
  c.dropout = 0.2;
  c.learning_rate = 1e-3;
  return c;
}

bool same_state(const ModalityClassifier& a, const ModalityClassifier& b) {
  return state_digest(a.state()) == state_digest(b.state());
}

}  // namespace

TEST(Adam, QuadraticFirstStep) {
  Tensor w = Tensor::scalar(1.0, true);
  multiply(w, w).backward();  // grad 2
  std::vector<NamedTensor> params{{"w", w}};
  OptimizerState st;
  adam_step(params, st, 0.1, 0.0);
  EXPECT_NEAR(w.item(), 0.9, 1e-7);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ZeroGradientNoDecayIsNoop) {
  Tensor w({1, 2}, {0.3, -0.7}, true);
  std::vector<NamedTensor> params{{"w", w}};
  OptimizerState st;
  adam_step(params, st, 0.1, 0.0);
  EXPECT_EQ(w.values()[0], 0.3);
  EXPECT_EQ(w.values()[1], -0.7);
}

TEST(Adam, DecoupledWeightDecay) {
  Tensor w = Tensor::scalar(2.0, true);
  std::vector<NamedTensor> params{{"w", w}};
  OptimizerState st;
  adam_step(params, st, 0.1, 0.5);
  EXPECT_NEAR(w.item(), 2.0 - 0.1 * 0.5 * 2.0, 1e-15);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Tensor w = Tensor::scalar(1.0, true);
  w.node()->accumulate(std::vector<double>{std::numeric_limits<double>::quiet_NaN()});
  std::vector<NamedTensor> params{{"encoder.conv0.weight", w}};
  OptimizerState st;
  try {
    adam_step(params, st, 0.1, 0.0);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.conv0.weight"), std::string::npos);
  }
}

TEST(Training, SameSeedBitIdentical) {
  auto d = tiny_data();
  TrainingData td{d.train, d.val, d.classes};
  auto enc = EncoderConfig::imu_default(0);
  auto a = train_target(tiny_config(), enc, nullptr, Modality::b, td);
  auto b = train_target(tiny_config(), enc, nullptr, Modality::b, td);
  EXPECT_TRUE(same_state(a.model, b.model));
  ASSERT_EQ(a.log.steps.size(), b.log.steps.size());
  for (std::size_t i = 0; i < a.log.steps.size(); ++i) EXPECT_EQ(a.log.steps[i].total, b.log.steps[i].total);
}

TEST(Training, LogShape) {
  auto d = tiny_data();
  TrainingData td{d.train, d.val, d.classes};
  auto r = train_target(tiny_config(), EncoderConfig::imu_default(0), nullptr, Modality::b, td);
  ASSERT_EQ(r.log.epochs.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(r.log.epochs[i].epoch, i + 1);
  EXPECT_EQ(r.log.steps.size(), 2 * (d.train.size() / 8));
  EXPECT_GE(r.log.best_epoch, 1u);
  EXPECT_EQ(r.model.mode(), Mode::eval);
}

TEST(Training, ZeroLambdaMatchesBaseline) {
  auto d = tiny_data();
  TrainingData td{d.train, d.val, d.classes};
  auto enc = EncoderConfig::imu_default(0);
  auto src = pretrain_source(tiny_config(), enc, Modality::a, td);
  auto cfg = tiny_config();
  auto base = train_target(cfg, enc, nullptr, Modality::b, td);
  cfg.lambda = 0.0;
  auto zero = train_target(cfg, enc, &src.source, Modality::b, td);
  EXPECT_TRUE(same_state(base.model, zero.model));
}

TEST(Training, AlignmentChangesTrajectory) {
  auto d = tiny_data();
  TrainingData td{d.train, d.val, d.classes};
  auto enc = EncoderConfig::imu_default(0);
  auto src = pretrain_source(tiny_config(), enc, Modality::a, td);
  auto cfg = tiny_config();
  cfg.masking_enabled = false;
  auto base = train_target(cfg, enc, nullptr, Modality::b, td);
  auto dcat = train_target(cfg, enc, &src.source, Modality::b, td);
  EXPECT_FALSE(same_state(base.model, dcat.model));
  for (const auto& s : dcat.log.steps) {
    EXPECT_GT(s.l_ca, 0.0);
    EXPECT_NEAR(s.total, s.l_ce + s.lambda * s.l_ca, 1e-12);
  }
}

TEST(Training, SourceStaysFrozen) {
  auto d = tiny_data();
  TrainingData td{d.train, d.val, d.classes};
  auto enc = EncoderConfig::imu_default(0);
  auto src = pretrain_source(tiny_config(), enc, Modality::a, td);
  const std::string before = src.source.current_digest();
  EXPECT_EQ(before, src.source.digest);
  (void)train_target(tiny_config(), enc, &src.source, Modality::b, td);
  EXPECT_EQ(src.source.current_digest(), before);
  EXPECT_TRUE(src.source.intact());
  for (const auto& p : src.source.model.parameters()) {
    EXPECT_FALSE(p.tensor.has_grad()) << p.name;
    EXPECT_FALSE(p.tensor.requires_grad()) << p.name;
  }
}

TEST(Training, DoutMismatchRejected) {
  auto d = tiny_data();
  TrainingData td{d.train, d.val, d.classes};
  auto enc = EncoderConfig::imu_default(0);
  auto src = pretrain_source(tiny_config(), enc, Modality::a, td);
  auto cfg = tiny_config();
  cfg.d_out = 16;
  EXPECT_THROW((void)train_target(cfg, enc, &src.source, Modality::b, td), std::invalid_argument);
}

TEST(Evaluate, PerfectStub) {
  auto d = tiny_data();
  Predictor oracle = [](std::span<const PairedSample> xs) {
    std::vector<int> p;
    for (const auto& x : xs) p.push_back(x.label);
    return p;
  };
  auto m = evaluate(oracle, d.val, d.classes);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.macro_f1, 1.0);
}

TEST(Evaluate, ReadsOnlyItsModality) {
  auto d = tiny_data();
  TrainingData td{d.train, d.val, d.classes};
  auto r = train_target(tiny_config(), EncoderConfig::imu_default(0), nullptr, Modality::b, td);
  auto poisoned = d.val;
  for (auto& s : poisoned)
    for (auto& v : s.raw_a.values) v = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(predict(r.model, Modality::b, d.val), predict(r.model, Modality::b, poisoned));
  auto m1 = evaluate(r.model, Modality::b, d.val, d.classes);
  auto m2 = evaluate(r.model, Modality::b, d.val, d.classes);
  EXPECT_EQ(m1.macro_f1, m2.macro_f1);
}

TEST(Config, TrainValidation) {
  TrainConfig c;
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.lambda = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ModalityText, RoundTrip) {
  EXPECT_EQ(modality_from_string(to_string(Modality::a)), Modality::a);
  EXPECT_EQ(modality_from_string(to_string(Modality::b)), Modality::b);
  EXPECT_THROW((void)modality_from_string("C"), std::invalid_argument);
}
