#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcat/datagen.hpp"
#include "dcat/encoders.hpp"
#include "dcat/losses.hpp"
#include "dcat/metrics.hpp"

namespace dcat {

/// Hyper-parameters of one training run.
struct TrainConfig {
  std::size_t epochs = 10;
  double learning_rate = 5e-4;
  std::size_t batch_size = 16;
  double dropout = 0.8;
  double weight_decay = 0.005;
  double lambda = 1.0;
  bool masking_enabled = true;
  std::uint64_t seed = 11;
  std::size_t d_out = 512;
  // Diagnostic: optimize the alignment term alone (cross-entropy is still logged).
  bool alignment_only = false;

  void validate() const;
};

enum class Modality { a, b };

const Signal& view(const PairedSample& s, Modality m);
std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update with decoupled weight decay
/// (p -= lr*wd*p before the Adam delta). A missing gradient counts as zero.
/// Throws NumericError naming the parameter if a gradient is not finite.
void adam_step(std::span<const NamedTensor> params, OptimizerState& state, double lr,
               double weight_decay);

/// Source classifier in eval mode with gradients disabled, plus the digest of
/// its state at freeze time.
struct FrozenSourceModel {
  ModalityClassifier model;
  Modality modality = Modality::a;
  std::string digest;

  static FrozenSourceModel freeze(ModalityClassifier model, Modality modality);
  [[nodiscard]] std::string current_digest() const;
  [[nodiscard]] bool intact() const { return current_digest() == digest; }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double l_ce = 0.0;      // means over the epoch's steps
  double l_ca = 0.0;
  double lambda = 0.0;
  double total = 0.0;
  double masked_in_fraction = 0.0;
  MetricsReport val;
  double seconds = 0.0;
};

struct RunLog {
  std::vector<EpochRecord> epochs;
  std::vector<LossBreakdown> steps;
  std::size_t best_epoch = 0;
};

struct TrainingData {
  std::span<const PairedSample> train;
  std::span<const PairedSample> val;
  std::size_t classes = 0;
};

struct TrainedModel {
  ModalityClassifier model;
  Modality modality = Modality::b;
  RunLog log;
};

/// Model shape for a modality: the encoder template with its input channels
/// and dropout set from the data and config.
ModelConfig make_model_config(const EncoderConfig& encoder_template, std::size_t in_channels,
                              const TrainConfig& cfg, std::size_t classes);

/// Called after every epoch; used for progress output.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains the source with cross-entropy only, restores the best-validation-F1
/// state and freezes it.
struct PretrainResult {
  FrozenSourceModel source;
  RunLog log;
};
PretrainResult pretrain_source(const TrainConfig& cfg, const EncoderConfig& encoder_template,
                               Modality modality, const TrainingData& data,
                               const EpochCallback& on_epoch = {});

/// Trains a target classifier. With a source and lambda > 0 every step adds the
/// masked alignment loss between target and (frozen) source signatures;
/// without a source this is the uni-modal baseline.
TrainedModel train_target(const TrainConfig& cfg, const EncoderConfig& encoder_template,
                          const FrozenSourceModel* source, Modality target_modality,
                          const TrainingData& data, const EpochCallback& on_epoch = {});

/// Maps a batch of samples to predicted class indices.
using Predictor = std::function<std::vector<int>(std::span<const PairedSample>)>;

/// Single pass over the split.
MetricsReport evaluate(const Predictor& predictor, std::span<const PairedSample> split,
                       std::size_t classes);

/// Eval-mode predictions reading only the given modality's view.
std::vector<int> predict(const ModalityClassifier& model, Modality modality,
                         std::span<const PairedSample> samples);

MetricsReport evaluate(const ModalityClassifier& model, Modality modality,
                       std::span<const PairedSample> split, std::size_t classes);

}  // namespace dcat
