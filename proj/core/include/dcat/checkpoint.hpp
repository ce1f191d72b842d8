#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "dcat/encoders.hpp"
#include "dcat/training.hpp"

namespace dcat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Raised when stored parameters do not hash to the recorded digest.
class CorruptCheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModalityClassifier model;
  Modality modality = Modality::a;
  std::string digest;
  nlohmann::json meta;
};

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Binary file: magic, format version, a length-prefixed JSON header (model
/// config, modality, tensor names and shapes, state digest, caller metadata)
/// and the raw f64 values of every tensor in header order.
void save_checkpoint(const std::filesystem::path& path, const ModalityClassifier& model,
                     Modality modality, const nlohmann::json& meta = nlohmann::json::object());

/// Rebuilds the classifier in eval mode. Throws CorruptCheckpointError when the
/// recomputed digest differs from the stored one.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dcat
