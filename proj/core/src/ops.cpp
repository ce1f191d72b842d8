#include "dcat/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcat {

namespace {

using detail::Node;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
  }
}

// Input i of `out` when that input takes gradients, else nullptr.
Node* grad_target(const Node& out, std::size_t i) {
  Node* in = out.inputs[i].get();
  return in->requires_grad ? in : nullptr;
}

// C += A * B for row-major A (m x k), B (k x n).
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C += A^T * B for A (k x m), B (k x n).
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = ap[i];
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

// C += A * B^T for A (m x k), B (n x k).
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

std::size_t segment_length(const Tensor& x, std::size_t segments, const char* op) {
  if (segments == 0 || x.rows() % segments != 0) {
    throw ShapeError(std::string(op) + ": " + std::to_string(x.rows()) +
                     " rows do not split into " + std::to_string(segments) + " sequences");
  }
  return x.rows() / segments;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto [m, k] = a.shape();
  const auto [k2, n] = b.shape();
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions of " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " disagree");
  }
  std::vector<double> out(m * n, 0.0);
  gemm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {a, b},
                     [m, k, n](const Node& o) {
                       const Node& an = *o.inputs[0];
                       const Node& bn = *o.inputs[1];
                       if (Node* ga = grad_target(o, 0)) {
                         gemm_nt_acc(o.grad.data(), bn.value.data(), ga->grad_buffer().data(),
                                     m, n, k);
                       }
                       if (Node* gb = grad_target(o, 1)) {
                         gemm_tn_acc(an.value.data(), o.grad.data(), gb->grad_buffer().data(),
                                     k, m, n);
                       }
                     },
                     "matmul");
}

Tensor transpose(const Tensor& x) {
  const auto [m, n] = x.shape();
  const auto v = x.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
  return make_result({n, m}, std::move(out), {x},
                     [m, n](const Node& o) {
                       Node* g = grad_target(o, 0);
                       auto buf = g->grad_buffer();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) buf[i * n + j] += o.grad[j * m + i];
                     },
                     "transpose");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](const Node& o) {
                       if (Node* g = grad_target(o, 0)) g->accumulate(o.grad);
                       if (Node* g = grad_target(o, 1)) g->accumulate(o.grad);
                     },
                     "add");
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "subtract");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](const Node& o) {
                       if (Node* g = grad_target(o, 0)) g->accumulate(o.grad);
                       if (Node* g = grad_target(o, 1)) {
                         auto buf = g->grad_buffer();
                         for (std::size_t i = 0; i < buf.size(); ++i) buf[i] -= o.grad[i];
                       }
                     },
                     "subtract");
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "multiply");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](const Node& o) {
                       const auto& av = o.inputs[0]->value;
                       const auto& bv = o.inputs[1]->value;
                       if (Node* g = grad_target(o, 0)) {
                         auto buf = g->grad_buffer();
                         for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += o.grad[i] * bv[i];
                       }
                       if (Node* g = grad_target(o, 1)) {
                         auto buf = g->grad_buffer();
                         for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += o.grad[i] * av[i];
                       }
                     },
                     "multiply");
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), {x},
                     [factor](const Node& o) {
                       auto buf = grad_target(o, 0)->grad_buffer();
                       for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += factor * o.grad[i];
                     },
                     "scale");
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(x.shape(), std::move(out), {x},
                     [](const Node& o) {
                       const auto& in = o.inputs[0]->value;
                       auto buf = grad_target(o, 0)->grad_buffer();
                       for (std::size_t i = 0; i < buf.size(); ++i)
                         if (in[i] > 0.0) buf[i] += o.grad[i];
                     },
                     "relu");
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  const auto [m, n] = x.shape();
  if (row.rows() != 1 || row.cols() != n) {
    throw ShapeError("add_row: row " + to_string(row.shape()) + " does not broadcast over " +
                     to_string(x.shape()));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto r = row.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += r[j];
  return make_result(x.shape(), std::move(out), {x, row},
                     [m, n](const Node& o) {
                       if (Node* g = grad_target(o, 0)) g->accumulate(o.grad);
                       if (Node* g = grad_target(o, 1)) {
                         auto buf = g->grad_buffer();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) buf[j] += o.grad[i * n + j];
                       }
                     },
                     "add_row");
}

Tensor divide_by_scalar(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) {
    throw ShapeError("divide_by_scalar: divisor " + to_string(s.shape()) + " is not 1x1");
  }
  const double d = s.item();
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v /= d;
  return make_result(x.shape(), std::move(out), {x, s},
                     [](const Node& o) {
                       const double d = o.inputs[1]->value[0];
                       if (Node* g = grad_target(o, 0)) {
                         auto buf = g->grad_buffer();
                         for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += o.grad[i] / d;
                       }
                       if (Node* g = grad_target(o, 1)) {
                         // d(x/d)/dd = -x/d^2 = -out/d
                         double acc = 0.0;
                         for (std::size_t i = 0; i < o.grad.size(); ++i)
                           acc += o.grad[i] * o.value[i];
                         g->grad_buffer()[0] -= acc / d;
                       }
                     },
                     "divide_by_scalar");
}

Tensor clamp_min(const Tensor& x, double floor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = std::max(v, floor);
  return make_result(x.shape(), std::move(out), {x},
                     [floor](const Node& o) {
                       const auto& in = o.inputs[0]->value;
                       auto buf = grad_target(o, 0)->grad_buffer();
                       for (std::size_t i = 0; i < buf.size(); ++i)
                         if (in[i] > floor) buf[i] += o.grad[i];
                     },
                     "clamp_min");
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = u(rng) < p ? 0.0 : keep_scale;
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_result(x.shape(), std::move(out), {x},
                     [mask = std::move(mask)](const Node& o) {
                       auto buf = grad_target(o, 0)->grad_buffer();
                       for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += o.grad[i] * mask[i];
                     },
                     "dropout");
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({1, 1}, {s}, {x},
                     [](const Node& o) {
                       auto buf = grad_target(o, 0)->grad_buffer();
                       for (auto& b : buf) b += o.grad[0];
                     },
                     "sum");
}

Tensor mean_over_rows(const Tensor& x) {
  const auto [m, n] = x.shape();
  std::vector<double> out(n, 0.0);
  const auto v = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += v[i * n + j];
  for (auto& o : out) o /= static_cast<double>(m);
  return make_result({1, n}, std::move(out), {x},
                     [m, n](const Node& o) {
                       auto buf = grad_target(o, 0)->grad_buffer();
                       const double inv = 1.0 / static_cast<double>(m);
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) buf[i * n + j] += o.grad[j] * inv;
                     },
                     "mean_over_rows");
}

Tensor frobenius_norm(const Tensor& x) {
  double ss = 0.0;
  for (double v : x.values()) ss += v * v;
  const double norm = std::sqrt(ss);
  return make_result({1, 1}, {norm}, {x},
                     [](const Node& o) {
                       const double norm = o.value[0];
                       // Zero matrix: the zero subgradient.
                       if (norm == 0.0) return;
                       const auto& in = o.inputs[0]->value;
                       auto buf = grad_target(o, 0)->grad_buffer();
                       const double f = o.grad[0] / norm;
                       for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += f * in[i];
                     },
                     "frobenius_norm");
}

Tensor softmax_rows(const Tensor& x) {
  const auto [m, n] = x.shape();
  const auto v = x.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = v.data() + i * n;
    double* dst = out.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(row[j] - mx);
      z += dst[j];
    }
    for (std::size_t j = 0; j < n; ++j) dst[j] /= z;
  }
  return make_result(x.shape(), std::move(out), {x},
                     [m, n](const Node& o) {
                       auto buf = grad_target(o, 0)->grad_buffer();
                       for (std::size_t i = 0; i < m; ++i) {
                         const double* y = o.value.data() + i * n;
                         const double* g = o.grad.data() + i * n;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
                         for (std::size_t j = 0; j < n; ++j) buf[i * n + j] += y[j] * (g[j] - dot);
                       }
                     },
                     "softmax_rows");
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  const auto [m, n] = x.shape();
  if (count == 0 || begin + count > m) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + to_string(x.shape()));
  }
  const auto v = x.values();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(begin * n),
                          v.begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
  return make_result({count, n}, std::move(out), {x},
                     [begin, n](const Node& o) {
                       auto buf = grad_target(o, 0)->grad_buffer();
                       for (std::size_t i = 0; i < o.grad.size(); ++i) buf[begin * n + i] += o.grad[i];
                     },
                     "slice_rows");
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) {
      throw ShapeError("concat_rows: " + to_string(p.shape()) + " does not stack under " +
                       to_string(parts.front().shape()));
    }
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return make_result({m, n}, std::move(out), parts,
                     [](const Node& o) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < o.inputs.size(); ++k) {
                         const std::size_t len = o.inputs[k]->value.size();
                         if (Node* g = grad_target(o, k)) {
                           g->accumulate(std::span<const double>(o.grad).subspan(offset, len));
                         }
                         offset += len;
                       }
                     },
                     "concat_rows");
}

Tensor unfold_time(const Tensor& x, std::size_t segments, std::size_t kernel, std::size_t stride) {
  const std::size_t t_in = segment_length(x, segments, "unfold_time");
  const std::size_t c = x.cols();
  if (kernel == 0 || stride == 0) throw ShapeError("unfold_time: kernel and stride must be positive");
  if (kernel > t_in) {
    throw ShapeError("unfold_time: kernel " + std::to_string(kernel) + " longer than sequence " +
                     std::to_string(t_in));
  }
  const std::size_t t_out = (t_in - kernel) / stride + 1;
  const std::size_t width = kernel * c;
  const auto v = x.values();
  std::vector<double> out(segments * t_out * width);
  for (std::size_t s = 0; s < segments; ++s)
    for (std::size_t t = 0; t < t_out; ++t) {
      const double* src = v.data() + (s * t_in + t * stride) * c;
      std::copy(src, src + width, out.data() + (s * t_out + t) * width);
    }
  return make_result({segments * t_out, width}, std::move(out), {x},
                     [segments, t_in, t_out, stride, width, c](const Node& o) {
                       auto buf = grad_target(o, 0)->grad_buffer();
                       for (std::size_t s = 0; s < segments; ++s)
                         for (std::size_t t = 0; t < t_out; ++t) {
                           double* dst = buf.data() + (s * t_in + t * stride) * c;
                           const double* g = o.grad.data() + (s * t_out + t) * width;
                           for (std::size_t i = 0; i < width; ++i) dst[i] += g[i];
                         }
                     },
                     "unfold_time");
}

Tensor pool_time(const Tensor& x, std::size_t segments, std::size_t width, PoolKind kind) {
  const std::size_t t_in = segment_length(x, segments, "pool_time");
  const std::size_t c = x.cols();
  if (width == 0 || width > t_in) {
    throw ShapeError("pool_time: width " + std::to_string(width) + " invalid for sequence " +
                     std::to_string(t_in));
  }
  const std::size_t t_out = (t_in - width) / width + 1;
  const auto v = x.values();
  std::vector<double> out(segments * t_out * c);
  // For max pooling, the source row of each output element (first max wins).
  std::vector<std::size_t> argmax(kind == PoolKind::max ? out.size() : 0);
  for (std::size_t s = 0; s < segments; ++s)
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t j = 0; j < c; ++j) {
        const std::size_t first = s * t_in + t * width;
        const std::size_t o = (s * t_out + t) * c + j;
        if (kind == PoolKind::max) {
          std::size_t best = first;
          for (std::size_t r = first + 1; r < first + width; ++r)
            if (v[r * c + j] > v[best * c + j]) best = r;
          out[o] = v[best * c + j];
          argmax[o] = best * c + j;
        } else {
          double acc = 0.0;
          for (std::size_t r = first; r < first + width; ++r) acc += v[r * c + j];
          out[o] = acc / static_cast<double>(width);
        }
      }
  return make_result({segments * t_out, c}, std::move(out), {x},
                     [segments, t_in, t_out, width, c, kind,
                      argmax = std::move(argmax)](const Node& o) {
                       auto buf = grad_target(o, 0)->grad_buffer();
                       if (kind == PoolKind::max) {
                         for (std::size_t i = 0; i < o.grad.size(); ++i) buf[argmax[i]] += o.grad[i];
                         return;
                       }
                       const double inv = 1.0 / static_cast<double>(width);
                       for (std::size_t s = 0; s < segments; ++s)
                         for (std::size_t t = 0; t < t_out; ++t)
                           for (std::size_t j = 0; j < c; ++j) {
                             const double g = o.grad[(s * t_out + t) * c + j] * inv;
                             const std::size_t first = s * t_in + t * width;
                             for (std::size_t r = first; r < first + width; ++r) buf[r * c + j] += g;
                           }
                     },
                     "pool_time");
}

BatchNormResult batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                 double eps) {
  const auto [m, n] = x.shape();
  if (gamma.shape() != Shape{1, n} || beta.shape() != Shape{1, n}) {
    throw ShapeError("batch_norm: affine parameters " + to_string(gamma.shape()) + "/" +
                     to_string(beta.shape()) + " do not match " + to_string(x.shape()));
  }
  const auto v = x.values();
  std::vector<double> mean(n, 0.0), var(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) mean[j] += v[i * n + j];
  for (auto& mu : mean) mu /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = v[i * n + j] - mean[j];
      var[j] += d * d;
    }
  for (auto& s : var) s /= static_cast<double>(m);

  std::vector<double> inv_std(n);
  for (std::size_t j = 0; j < n; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  std::vector<double> xhat(m * n), out(m * n);
  const auto g = gamma.values();
  const auto b = beta.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (v[i * n + j] - mean[j]) * inv_std[j];
      out[i * n + j] = g[j] * xhat[i * n + j] + b[j];
    }

  Tensor y = make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [m, n, xhat = std::move(xhat), inv_std](const Node& o) {
        const auto& gam = o.inputs[1]->value;
        if (Node* gg = grad_target(o, 1)) {
          auto buf = gg->grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) buf[j] += o.grad[i * n + j] * xhat[i * n + j];
        }
        if (Node* gb = grad_target(o, 2)) {
          auto buf = gb->grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) buf[j] += o.grad[i * n + j];
        }
        if (Node* gx = grad_target(o, 0)) {
          // dx = gamma*inv_std/m * (m*dy - sum(dy) - xhat*sum(dy*xhat))
          std::vector<double> sum_dy(n, 0.0), sum_dy_xhat(n, 0.0);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              sum_dy[j] += o.grad[i * n + j];
              sum_dy_xhat[j] += o.grad[i * n + j] * xhat[i * n + j];
            }
          auto buf = gx->grad_buffer();
          const double md = static_cast<double>(m);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              const double k = gam[j] * inv_std[j] / md;
              buf[i * n + j] +=
                  k * (md * o.grad[i * n + j] - sum_dy[j] - xhat[i * n + j] * sum_dy_xhat[j]);
            }
        }
      },
      "batch_norm_train");
  return {std::move(y), std::move(mean), std::move(var)};
}

Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       const std::vector<double>& mean, const std::vector<double>& variance,
                       double eps) {
  const auto [m, n] = x.shape();
  if (gamma.shape() != Shape{1, n} || beta.shape() != Shape{1, n} || mean.size() != n ||
      variance.size() != n) {
    throw ShapeError("batch_norm_eval: statistics do not match " + to_string(x.shape()));
  }
  std::vector<double> inv_std(n);
  for (std::size_t j = 0; j < n; ++j) inv_std[j] = 1.0 / std::sqrt(variance[j] + eps);
  const auto v = x.values();
  const auto g = gamma.values();
  const auto b = beta.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = g[j] * ((v[i * n + j] - mean[j]) * inv_std[j]) + b[j];
  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [m, n, mean, inv_std](const Node& o) {
        const auto& in = o.inputs[0]->value;
        const auto& gam = o.inputs[1]->value;
        if (Node* gx = grad_target(o, 0)) {
          auto buf = gx->grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) buf[i * n + j] += o.grad[i * n + j] * gam[j] * inv_std[j];
        }
        if (Node* gg = grad_target(o, 1)) {
          auto buf = gg->grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              buf[j] += o.grad[i * n + j] * (in[i * n + j] - mean[j]) * inv_std[j];
        }
        if (Node* gb = grad_target(o, 2)) {
          auto buf = gb->grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) buf[j] += o.grad[i * n + j];
        }
      },
      "batch_norm_eval");
}

}  // namespace dcat
