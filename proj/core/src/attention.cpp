#include "dcat/attention.hpp"

#include <cmath>

#include "dcat/ops.hpp"

namespace dcat {

void AttentionConfig::validate() const {
  if (d_model == 0 || d_out == 0 || seq_len == 0) {
    throw std::invalid_argument("attention dimensions must be positive (d_model=" +
                                std::to_string(d_model) + ", d_out=" + std::to_string(d_out) +
                                ", seq_len=" + std::to_string(seq_len) + ")");
  }
}

ProjectionWeights ProjectionWeights::init(std::size_t d_model, std::size_t d_out, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(d_model));
  ProjectionWeights w;
  w.w_k = Tensor::uniform({d_model, d_out}, -bound, bound, rng, true);
  w.w_q = Tensor::uniform({d_model, d_out}, -bound, bound, rng, true);
  w.w_v = Tensor::uniform({d_model, d_out}, -bound, bound, rng, true);
  return w;
}

AttentionTriple project(const Tensor& e, const ProjectionWeights& w) {
  if (e.cols() != w.w_k.rows()) {
    throw ShapeError("project: embeddings " + to_string(e.shape()) +
                     " do not match projection " + to_string(w.w_k.shape()));
  }
  return {matmul(e, w.w_k), matmul(e, w.w_q), matmul(e, w.w_v)};
}

Tensor self_attention(const AttentionTriple& t) { return cross_attention(t.q, t.k, t.v); }

Tensor cross_attention(const Tensor& q_b, const Tensor& k_a, const Tensor& v_a) {
  if (q_b.cols() != k_a.cols()) {
    throw ShapeError("cross_attention: query " + to_string(q_b.shape()) + " and key " +
                     to_string(k_a.shape()) + " widths differ");
  }
  if (k_a.rows() != v_a.rows()) {
    throw ShapeError("cross_attention: key " + to_string(k_a.shape()) + " and value " +
                     to_string(v_a.shape()) + " lengths differ");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q_b.cols()));
  const Tensor scores = scale(matmul(q_b, transpose(k_a)), inv_sqrt_d);
  return matmul(softmax_rows(scores), v_a);
}

AttentionSignature signature(const Tensor& k, const Tensor& v) {
  if (k.rows() != v.rows()) {
    throw ShapeError("signature: key " + to_string(k.shape()) + " and value " +
                     to_string(v.shape()) + " lengths differ");
  }
  return {matmul(transpose(k), v)};
}

}  // namespace dcat
