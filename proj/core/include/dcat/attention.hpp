#pragma once

#include <cstddef>

#include "dcat/tensor.hpp"

namespace dcat {

/// Single-head attention dimensions. Keys, queries and values share d_out.
struct AttentionConfig {
  std::size_t d_model = 0;
  std::size_t d_out = 512;
  std::size_t seq_len = 0;

  void validate() const;
};

/// Linear projections of an embedding sequence into key, query and value space.
struct ProjectionWeights {
  Tensor w_k;  // d_model x d_out
  Tensor w_q;
  Tensor w_v;

  /// Uniform in +-sqrt(1/d_model), trainable.
  static ProjectionWeights init(std::size_t d_model, std::size_t d_out, Rng& rng);
};

struct AttentionTriple {
  Tensor k;  // SL x d_out
  Tensor q;
  Tensor v;
};

/// The d_out x d_out matrix K^T V compared by the alignment loss.
struct AttentionSignature {
  Tensor sig;
};

/// K = E W_K, Q = E W_Q, V = E W_V.
AttentionTriple project(const Tensor& e, const ProjectionWeights& w);

/// softmax(Q K^T / sqrt(d_out)) V
Tensor self_attention(const AttentionTriple& t);

/// softmax(Q_B K_A^T / sqrt(d_out)) V_A. The source length may differ from the
/// target length; the output keeps the query's row count.
Tensor cross_attention(const Tensor& q_b, const Tensor& k_a, const Tensor& v_a);

/// K^T V, without softmax or scaling.
AttentionSignature signature(const Tensor& k, const Tensor& v);

}  // namespace dcat
