#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcat/datagen.hpp"

namespace dcat {

inline constexpr int kDatasetSchemaVersion = 1;

/// Thrown when a data file does not belong to the current configuration.
class StaleDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetHeader {
  int schema_version = kDatasetSchemaVersion;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string split;
  std::size_t count = 0;
  std::size_t length = 0;
  std::size_t channels_a = 0;
  std::size_t channels_b = 0;
  std::vector<int> subjects;  // sorted, distinct

  [[nodiscard]] nlohmann::json to_json() const;
  static DatasetHeader from_json(const nlohmann::json& j);
};

/// Columnar file: one JSON header line, then ids, parent ids, labels,
/// subjects, all modality-A values and all modality-B values as raw
/// little-endian arrays.
void write_split(const std::filesystem::path& path, std::span<const PairedSample> samples,
                 const std::string& config_hash, std::uint64_t seed, const std::string& split);

DatasetHeader read_split_header(const std::filesystem::path& path);

/// Throws StaleDataError if the stored config hash differs from `expected_hash`.
std::vector<PairedSample> read_split(const std::filesystem::path& path,
                                     const std::string& expected_hash);

}  // namespace dcat
