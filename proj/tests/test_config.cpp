#include <gtest/gtest.h>

#include "dcat/ablation.hpp"
#include "dcat/config.hpp"

using namespace dcat;
using nlohmann::json;

namespace {

std::string error_of(const json& j) {
  try {
    (void)experiment_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, RoundTrip) {
  ExperimentConfig cfg;
  cfg.seed = 21;
  cfg.dataset.snr_b = 0.45;
  cfg.target.epochs = 3;
  cfg.transfer.lambda = 0.1;
  cfg.transfer.masking_enabled = false;
  cfg.derive_seeds();
  const json j = to_json(cfg);
  const auto back = experiment_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.dataset.seed, 21u);
}

TEST(Config, DefaultGrid) {
  ExperimentConfig cfg;
  EXPECT_EQ(cfg.transfer.lambda_grid, kDefaultLambdaGrid);
  EXPECT_EQ(kDefaultLambdaGrid, (std::vector<double>{0.01, 0.1, 1.0, 10.0}));
}

TEST(Config, UnknownKeyNamed) {
  json j = to_json(ExperimentConfig{});
  j["target"]["epoch"] = 3;
  const auto msg = error_of(j);
  EXPECT_NE(msg.find("target.epoch"), std::string::npos) << msg;
}

TEST(Config, WrongTypeNamed) {
  json j = to_json(ExperimentConfig{});
  j["dataset"]["classes"] = "eight";
  const auto msg = error_of(j);
  EXPECT_NE(msg.find("dataset.classes"), std::string::npos) << msg;
  j = to_json(ExperimentConfig{});
  j["seed"] = -3;
  EXPECT_FALSE(error_of(j).empty());
}

TEST(Config, InvalidValueNamesBlock) {
  json j = to_json(ExperimentConfig{});
  j["target"]["dropout"] = 1.5;
  const auto msg = error_of(j);
  EXPECT_NE(msg.find("target"), std::string::npos) << msg;
}

TEST(Config, MissingKeysKeepDefaults) {
  const auto cfg = experiment_from_json(json{{"seed", 3}});
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.dataset.classes, ExperimentConfig{}.dataset.classes);
}

TEST(Config, DirectionParsed) {
  json j = to_json(ExperimentConfig{});
  j["transfer"]["direction"] = "B->A";
  const auto cfg = experiment_from_json(j);
  EXPECT_EQ(cfg.transfer.source, Modality::b);
  EXPECT_EQ(cfg.transfer.target(), Modality::a);
  j["transfer"]["direction"] = "A->C";
  EXPECT_THROW((void)experiment_from_json(j), ConfigError);
}

TEST(Config, DoutMustMatch) {
  json j = to_json(ExperimentConfig{});
  j["target"]["d_out"] = j["source"]["d_out"].get<int>() * 2;
  EXPECT_THROW((void)experiment_from_json(j), ConfigError);
}

TEST(Config, WindowLongerThanRecording) {
  json j = to_json(ExperimentConfig{});
  j["window"]["length"] = 1000;
  EXPECT_THROW((void)experiment_from_json(j), ConfigError);
}

TEST(Override, ParsesJsonOrString) {
  json j = to_json(ExperimentConfig{});
  apply_override(j, "target.epochs=4");
  apply_override(j, "transfer.masking=false");
  apply_override(j, "output_dir=runs/x");
  apply_override(j, "transfer.seeds=[9,10]");
  const auto cfg = experiment_from_json(j);
  EXPECT_EQ(cfg.target.epochs, 4u);
  EXPECT_FALSE(cfg.transfer.masking_enabled);
  EXPECT_EQ(cfg.output_dir, "runs/x");
  EXPECT_EQ(cfg.transfer.seeds, (std::vector<std::uint64_t>{9, 10}));
}

TEST(Override, RejectsUnknownKeyAndBadSyntax) {
  json j = to_json(ExperimentConfig{});
  EXPECT_THROW(apply_override(j, "target.epoks=4"), ConfigError);
  EXPECT_THROW(apply_override(j, "target.epochs"), ConfigError);
}

TEST(Hash, DatasetHashTracksDataBlocksOnly) {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.target.epochs = 99;
  b.output_dir = "elsewhere";
  EXPECT_EQ(dataset_hash(a), dataset_hash(b));
  b.dataset.snr_b = 0.1;
  EXPECT_NE(dataset_hash(a), dataset_hash(b));
  ExperimentConfig c = a;
  c.seed = 8;
  c.derive_seeds();
  EXPECT_NE(dataset_hash(a), dataset_hash(c));
}

TEST(Hash, Stable) {
  EXPECT_EQ(json_hash(json{{"a", 1}}), json_hash(json{{"a", 1}}));
  EXPECT_EQ(json_hash(json{{"a", 1}}).size(), 64u);
}
