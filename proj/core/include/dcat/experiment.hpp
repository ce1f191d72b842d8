#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcat/ablation.hpp"
#include "dcat/config.hpp"
#include "dcat/training.hpp"

namespace dcat {

/// git-describe style version baked in at configure time.
std::string version_string();

/// Thrown when a command's prerequisites (data, checkpoints) are missing.
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One target run: transfer weight, seed and whether masking is on.
struct RunSpec {
  double lambda = 1.0;
  std::uint64_t seed = 1;
  bool masking = true;
};

/// Short, stable text for a lambda value ("0.01", "10").
std::string format_lambda(double lambda);

struct SplitWindows {
  std::vector<PairedSample> train, val, test;
  std::size_t classes = 0;

  [[nodiscard]] std::span<const PairedSample> get(const std::string& split) const;
};

struct AblateOptions {
  std::size_t workers = 1;
  /// Executable re-invoked as `<exe> transfer ...` for each cell when
  /// workers > 1. Empty runs every cell in this process.
  std::filesystem::path executable;
};

/// Resolves the worker count: the explicit flag if non-zero, else the
/// DCAT_WORKERS environment variable, else 1.
std::size_t resolve_workers(std::size_t flag);

/// Progress hook: run label plus the finished epoch.
using ProgressFn = std::function<void(const std::string&, const EpochRecord&)>;

/// The configuration's output directory. Every command writes config.json on
/// first use and refuses a directory holding a different one.
///
/// Layout: data/, source/, baseline/seed-S/, transfer/lambda-L_seed-S_(masked|unmasked)/,
/// ablation/, verify/. Each run directory holds checkpoint.bin, epochs.jsonl,
/// steps.jsonl, metrics.json, timing.json and manifest.json (written last).
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg, ProgressFn progress = {});

  [[nodiscard]] const ExperimentConfig& config() const { return cfg_; }
  [[nodiscard]] const std::filesystem::path& root() const { return root_; }

  [[nodiscard]] std::filesystem::path data_dir() const { return root_ / "data"; }
  [[nodiscard]] std::filesystem::path source_dir() const { return root_ / "source"; }
  [[nodiscard]] std::filesystem::path baseline_dir(std::uint64_t seed) const;
  [[nodiscard]] std::filesystem::path transfer_dir(const RunSpec& run) const;
  [[nodiscard]] std::filesystem::path ablation_dir() const { return root_ / "ablation"; }
  [[nodiscard]] std::filesystem::path verify_dir() const { return root_ / "verify"; }

  /// Generates, splits and stores the recordings. Returns the data manifest.
  nlohmann::json synth();
  /// Loads and windows the stored splits; throws StaleDataError on a hash mismatch.
  [[nodiscard]] SplitWindows load_data() const;

  nlohmann::json pretrain();
  nlohmann::json baseline(std::uint64_t seed);
  /// Requires the source checkpoint. Returns the run manifest.
  nlohmann::json transfer(const RunSpec& run);

  /// Runs every (lambda, seed) cell of the grid that has no complete manifest,
  /// then aggregates. Failed cells are listed in the thrown error.
  AblationTable ablate(const AblateOptions& options);

  /// Eval-mode metrics of a stored checkpoint on one split, reading only the
  /// checkpoint's modality.
  nlohmann::json evaluate(const std::filesystem::path& checkpoint, const std::string& split);

  /// Gradient checks, loss invariants, factorization recovery, checkpoint
  /// digests and alignment residuals of the trained target against its
  /// untrained initialization. Writes verify/report.json.
  nlohmann::json verify();

  /// True when `dir` holds a complete manifest for this configuration.
  [[nodiscard]] bool run_complete(const std::filesystem::path& dir) const;

 private:
  void bind_directory();
  nlohmann::json write_run(const std::filesystem::path& dir, const std::string& command,
                           const ModalityClassifier& model, Modality modality, const RunLog& log,
                           std::uint64_t seed, const SplitWindows& data, nlohmann::json extra);
  [[nodiscard]] TrainConfig target_config(const RunSpec& run) const;

  ExperimentConfig cfg_;
  std::filesystem::path root_;
  ProgressFn progress_;
  std::string config_hash_;
  std::string dataset_hash_;
};

}  // namespace dcat
