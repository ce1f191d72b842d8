#include "dcat/losses.hpp"

#include <algorithm>
#include <cmath>

#include "dcat/ops.hpp"

namespace dcat {

namespace {

void check_labels(std::span<const int> labels, std::size_t n, std::size_t classes,
                  const char* op) {
  if (labels.size() != n) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::out_of_range(std::string(op) + ": label " + std::to_string(y) +
                              " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be a finite non-negative number");
  }
  if (!(norm_epsilon > 0.0)) throw std::invalid_argument("norm_epsilon must be positive");
}

std::size_t CorrectnessMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

CorrectnessMask CorrectnessMask::all(std::size_t n, bool on) {
  return {std::vector<std::uint8_t>(n, on ? 1 : 0)};
}

AttentionSignature normalize_frobenius(const AttentionSignature& m, double eps) {
  return {divide_by_scalar(m.sig, clamp_min(frobenius_norm(m.sig), eps))};
}

Tensor cross_attention_loss(const AttentionSignature& sig_b, const AttentionSignature& sig_a,
                            const LossConfig& cfg) {
  if (sig_b.sig.shape() != sig_a.sig.shape()) {
    throw ShapeError("cross_attention_loss: signatures " + to_string(sig_b.sig.shape()) +
                     " and " + to_string(sig_a.sig.shape()) + " differ");
  }
  AttentionSignature frozen{sig_a.sig.detach()};
  if (cfg.normalization == SignatureNormalization::unit_frobenius) {
    return frobenius_norm(subtract(normalize_frobenius(sig_b, cfg.norm_epsilon).sig,
                                   normalize_frobenius(frozen, cfg.norm_epsilon).sig));
  }
  return frobenius_norm(subtract(sig_b.sig, frozen.sig));
}

Tensor masked_cross_attention_loss(std::span<const AttentionSignature> sig_b,
                                   std::span<const AttentionSignature> sig_a,
                                   const CorrectnessMask& mask, const LossConfig& cfg) {
  if (sig_b.size() != sig_a.size() || sig_b.size() != mask.bits.size()) {
    throw ShapeError("masked_cross_attention_loss: " + std::to_string(sig_b.size()) +
                     " target signatures, " + std::to_string(sig_a.size()) +
                     " source signatures, " + std::to_string(mask.bits.size()) + " mask bits");
  }
  std::vector<Tensor> terms;
  for (std::size_t i = 0; i < sig_b.size(); ++i) {
    if (mask.bits[i] || !cfg.masking_enabled) terms.push_back(cross_attention_loss(sig_b[i], sig_a[i], cfg));
  }
  if (terms.empty()) return Tensor::scalar(0.0);
  return scale(sum(concat_rows(terms)), 1.0 / static_cast<double>(terms.size()));
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const auto [n, c] = logits.shape();
  check_labels(labels, n, c, "cross_entropy");
  const auto z = logits.values();
  std::vector<double> probs(n * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    loss += lse - row[labels[i]];
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
  }
  loss /= static_cast<double>(n);
  std::vector<int> y(labels.begin(), labels.end());
  return make_result({1, 1}, {loss}, {logits},
                     [n, c, probs = std::move(probs), y = std::move(y)](const detail::Node& o) {
                       auto buf = o.inputs[0]->grad_buffer();
                       const double f = o.grad[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j) {
                           const double onehot = static_cast<int>(j) == y[i] ? 1.0 : 0.0;
                           buf[i * c + j] += f * (probs[i * c + j] - onehot);
                         }
                     },
                     "cross_entropy");
}

TotalLoss total_loss(const Tensor& l_ce, const Tensor& l_ca, std::size_t masked_in_count,
                     const LossConfig& cfg) {
  cfg.validate();
  TotalLoss out;
  out.breakdown.l_ce = l_ce.item();
  out.breakdown.l_ca = l_ca.item();
  out.breakdown.lambda = cfg.lambda;
  out.breakdown.masked_in_count = masked_in_count;
  out.total = cfg.lambda == 0.0 ? l_ce : add(l_ce, scale(l_ca, cfg.lambda));
  out.breakdown.total = out.total.item();
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const auto [n, c] = logits.shape();
  const auto z = logits.values();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data() + i * c;
    out[i] = static_cast<int>(std::max_element(row, row + c) - row);
  }
  return out;
}

CorrectnessMask compute_mask(const Tensor& source_logits, std::span<const int> labels) {
  check_labels(labels, source_logits.rows(), source_logits.cols(), "compute_mask");
  const auto pred = argmax_rows(source_logits);
  CorrectnessMask mask;
  mask.bits.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) mask.bits[i] = pred[i] == labels[i] ? 1 : 0;
  return mask;
}

}  // namespace dcat
