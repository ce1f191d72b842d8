#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dcat/attention.hpp"
#include "dcat/tensor.hpp"

namespace dcat {

/// How each signature is normalized before the two are compared.
enum class SignatureNormalization {
  unit_frobenius,  // M / max(||M||_F, eps)
  none,            // raw K^T V; diagnostics only, the loss is then not scale invariant
};

struct LossConfig {
  double lambda = 1.0;
  double norm_epsilon = 1e-12;
  bool masking_enabled = true;
  SignatureNormalization normalization = SignatureNormalization::unit_frobenius;

  void validate() const;
};

/// Per-sample indicator: 1 when the frozen source classifies the sample correctly.
struct CorrectnessMask {
  std::vector<std::uint8_t> bits;

  [[nodiscard]] std::size_t count() const;
  static CorrectnessMask all(std::size_t n, bool on);
};

struct LossBreakdown {
  double l_ce = 0.0;
  double l_ca = 0.0;
  double lambda = 0.0;
  double total = 0.0;
  std::size_t masked_in_count = 0;
};

AttentionSignature normalize_frobenius(const AttentionSignature& m, double eps);

/// ||norm(sig_b) - norm(sig_a)||_F. sig_a is treated as a constant, so
/// gradients reach only sig_b.
Tensor cross_attention_loss(const AttentionSignature& sig_b, const AttentionSignature& sig_a,
                            const LossConfig& cfg = {});

/// Mean of the per-sample alignment loss over samples whose mask bit is set,
/// or over every sample when masking is disabled. A constant zero when
/// nothing is masked in.
Tensor masked_cross_attention_loss(std::span<const AttentionSignature> sig_b,
                                   std::span<const AttentionSignature> sig_a,
                                   const CorrectnessMask& mask, const LossConfig& cfg = {});

/// Mean negative log-likelihood of the labels under softmax(logits), via
/// log-sum-exp with max subtraction.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

struct TotalLoss {
  Tensor total;
  LossBreakdown breakdown;
};

/// total = l_ce + lambda * l_ca. With lambda == 0 the alignment term is not
/// attached to the graph at all.
TotalLoss total_loss(const Tensor& l_ce, const Tensor& l_ca, std::size_t masked_in_count,
                     const LossConfig& cfg);

/// Bit n is set iff argmax(source_logits[n]) == labels[n]; ties go to the
/// lowest class index.
CorrectnessMask compute_mask(const Tensor& source_logits, std::span<const int> labels);

/// Index of the largest entry of each row, lowest index on ties.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace dcat
