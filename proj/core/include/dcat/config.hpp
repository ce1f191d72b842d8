#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcat/datagen.hpp"
#include "dcat/encoders.hpp"
#include "dcat/training.hpp"

namespace dcat {

/// Thrown for malformed or semantically invalid configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WindowConfig {
  std::size_t length = 70;
  std::size_t stride = 70;

  void validate() const;
};

struct TransferConfig {
  std::vector<double> lambda_grid;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double lambda = 1.0;
  bool masking_enabled = true;
  Modality source = Modality::a;  // direction source -> target

  [[nodiscard]] Modality target() const { return source == Modality::a ? Modality::b : Modality::a; }
  [[nodiscard]] std::string direction() const;
  void validate() const;
};

/// Everything one experiment needs. The global seed derives the dataset,
/// split and source seeds; target runs take their seeds from `transfer.seeds`.
struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "runs/default";
  DatasetConfig dataset;
  WindowConfig window;
  SplitSpec split;
  EncoderConfig encoder;  // template; in_channels and dropout are filled per modality
  TrainConfig source;
  TrainConfig target;
  TransferConfig transfer;

  ExperimentConfig();

  /// Copies the global seed into the dataset, split and source blocks.
  void derive_seeds();
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Strict: unknown keys, wrong types and invalid values raise ConfigError
/// naming the offending key path. Missing keys keep their defaults.
ExperimentConfig experiment_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Applies "dotted.key.path=value". The value is parsed as JSON when possible
/// and taken as a plain string otherwise. The key must already exist.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// SHA-256 of the canonical serialization.
std::string json_hash(const nlohmann::json& j);
/// Hash of the blocks that determine the generated data.
std::string dataset_hash(const ExperimentConfig& cfg);

}  // namespace dcat
