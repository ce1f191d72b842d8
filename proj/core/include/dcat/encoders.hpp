#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dcat/attention.hpp"
#include "dcat/datagen.hpp"
#include "dcat/ops.hpp"
#include "dcat/tensor.hpp"

namespace dcat {

enum class StageKind { conv, max_pool, mean_pool };

/// One stage of the convolutional stack. Conv stages are followed by batch
/// norm and ReLU; pool stages use `kernel` as their (non-overlapping) width.
struct EncoderStage {
  StageKind kind = StageKind::conv;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t out_channels = 0;
};

struct EncoderConfig {
  std::size_t in_channels = 0;
  std::vector<EncoderStage> stages;
  double batch_norm_momentum = 0.9;
  double batch_norm_eps = 1e-5;
  double dropout_rate = 0.0;  // applied after the last stage

  /// Conv block, pool, two conv blocks, pool (dropout follows the last pool).
  static EncoderConfig imu_default(std::size_t in_channels);

  [[nodiscard]] std::size_t d_model() const;
  /// Output sequence length T_m for an input of `length` samples. Throws
  /// std::invalid_argument naming the first stage whose output would be empty.
  [[nodiscard]] std::size_t output_length(std::size_t length) const;
  void validate() const;
};

enum class Mode { training, eval };

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Modality-specific 1-D convolutional encoder producing T_m x d_model embeddings.
class ModalityEncoder {
 public:
  ModalityEncoder() = default;
  ModalityEncoder(EncoderConfig config, Rng& rng);

  /// Encodes a batch stacked as (N*T) x C_in into (N*T_m) x d_model.
  /// Training mode uses batch statistics, updates the running statistics and
  /// draws dropout masks from `rng`.
  Tensor encode_batch(const Tensor& batch, std::size_t batch_size, Rng& rng);
  /// Eval-mode forward; pure.
  [[nodiscard]] Tensor encode_batch(const Tensor& batch, std::size_t batch_size) const;

  [[nodiscard]] const EncoderConfig& config() const { return config_; }
  [[nodiscard]] Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

  /// Trainable tensors (convolution weights, batch-norm scale and shift).
  [[nodiscard]] std::vector<NamedTensor> parameters() const;
  /// Running statistics, stored as 1 x C tensors.
  [[nodiscard]] std::vector<NamedTensor> buffers() const;

 private:
  struct ConvBlock {
    Tensor weight;  // (kernel*C_in) x C_out
    Tensor gamma;   // 1 x C_out
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
  };

  Tensor forward(const Tensor& batch, std::size_t batch_size, bool training, Rng* rng) const;

  EncoderConfig config_;
  std::vector<ConvBlock> blocks_;
  Mode mode_ = Mode::training;
};

/// Mean over the sequence followed by one linear layer.
struct ClassifierHead {
  Tensor weight;  // d_out x C
  Tensor bias;    // 1 x C

  static ClassifierHead init(std::size_t d_out, std::size_t classes, Rng& rng);
};

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t d_out = 512;
  std::size_t classes = 8;

  void validate() const;
};

/// Encoder -> self-attention -> head for one modality.
class ModalityClassifier {
 public:
  struct Output {
    Tensor logits;                        // N x C
    std::vector<AttentionTriple> triples;  // one per sample
  };

  ModalityClassifier() = default;
  ModalityClassifier(ModelConfig config, Rng& rng);

  /// Training-mode forward over windows (each T x C_in, already normalized or not;
  /// min-max normalization is applied here).
  Output forward(std::span<const Signal* const> batch, Rng& rng);
  /// Eval-mode forward; pure.
  [[nodiscard]] Output infer(std::span<const Signal* const> batch) const;
  /// Logits for a single window, eval mode.
  [[nodiscard]] std::vector<double> classify(const Signal& raw) const;

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] Mode mode() const { return encoder_.mode(); }
  void set_mode(Mode mode) { encoder_.set_mode(mode); }
  void set_trainable(bool on);

  [[nodiscard]] std::vector<NamedTensor> parameters() const;
  [[nodiscard]] std::vector<NamedTensor> buffers() const;
  /// Parameters followed by buffers, in a fixed order.
  [[nodiscard]] std::vector<NamedTensor> state() const;

  /// Copies values from a state list of identical names and shapes.
  void load_state(std::span<const NamedTensor> source);

  [[nodiscard]] const ProjectionWeights& attention() const { return attention_; }
  [[nodiscard]] const ModalityEncoder& encoder() const { return encoder_; }

 private:
  Output run(std::span<const Signal* const> batch, const Tensor& embeddings) const;

  ModelConfig config_;
  ModalityEncoder encoder_;
  ProjectionWeights attention_;
  ClassifierHead head_;
};

/// Eval-mode embeddings of one raw window: T_m x d_model.
Tensor encode(const Signal& raw, const ModalityEncoder& encoder);

/// Stacks min-max normalized windows into an (N*T) x C tensor.
Tensor stack_windows(std::span<const Signal* const> batch);

/// Deep copy; the clone shares no storage with the original.
ModalityClassifier clone(const ModalityClassifier& model);

}  // namespace dcat
