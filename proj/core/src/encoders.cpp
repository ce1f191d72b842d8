#include "dcat/encoders.hpp"

#include <cmath>

#include "dcat/ops.hpp"

namespace dcat {

namespace {

const char* stage_name(StageKind kind) {
  switch (kind) {
    case StageKind::conv:
      return "conv";
    case StageKind::max_pool:
      return "max_pool";
    case StageKind::mean_pool:
      return "mean_pool";
  }
  return "?";
}

}  // namespace

EncoderConfig EncoderConfig::imu_default(std::size_t in_channels) {
  EncoderConfig cfg;
  cfg.in_channels = in_channels;
  cfg.stages = {
      {StageKind::conv, 5, 1, 16},
      {StageKind::max_pool, 2, 2, 0},
      {StageKind::conv, 3, 1, 32},
      {StageKind::conv, 3, 1, 32},
      {StageKind::max_pool, 2, 2, 0},
  };
  return cfg;
}

std::size_t EncoderConfig::d_model() const {
  std::size_t channels = in_channels;
  for (const auto& s : stages)
    if (s.kind == StageKind::conv) channels = s.out_channels;
  return channels;
}

std::size_t EncoderConfig::output_length(std::size_t length) const {
  std::size_t t = length;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    const std::size_t stride = s.kind == StageKind::conv ? s.stride : s.kernel;
    if (s.kernel > t) {
      throw std::invalid_argument("window too short: stage " + std::to_string(i) + " (" +
                                  stage_name(s.kind) + ", kernel " + std::to_string(s.kernel) +
                                  ") receives only " + std::to_string(t) + " samples");
    }
    t = (t - s.kernel) / stride + 1;
  }
  return t;
}

void EncoderConfig::validate() const {
  if (in_channels == 0) throw std::invalid_argument("encoder in_channels must be positive");
  bool has_conv = false;
  for (const auto& s : stages) {
    if (s.kernel == 0) throw std::invalid_argument("encoder stage kernel must be positive");
    if (s.kind == StageKind::conv) {
      if (s.stride == 0 || s.out_channels == 0) {
        throw std::invalid_argument("conv stage needs positive stride and out_channels");
      }
      has_conv = true;
    }
  }
  if (!has_conv) throw std::invalid_argument("encoder needs at least one conv stage");
  if (!(batch_norm_momentum >= 0.0 && batch_norm_momentum <= 1.0)) {
    throw std::invalid_argument("batch_norm_momentum must lie in [0, 1]");
  }
  if (!(batch_norm_eps > 0.0)) throw std::invalid_argument("batch_norm_eps must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  }
}

ModalityEncoder::ModalityEncoder(EncoderConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  std::size_t channels = config_.in_channels;
  for (const auto& s : config_.stages) {
    if (s.kind != StageKind::conv) continue;
    const std::size_t fan_in = s.kernel * channels;
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    ConvBlock b;
    b.weight = Tensor::uniform({fan_in, s.out_channels}, -bound, bound, rng, true);
    b.gamma = Tensor::filled({1, s.out_channels}, 1.0, true);
    b.beta = Tensor::zeros({1, s.out_channels}, true);
    b.running_mean = Tensor::zeros({1, s.out_channels});
    b.running_var = Tensor::filled({1, s.out_channels}, 1.0);
    blocks_.push_back(std::move(b));
    channels = s.out_channels;
  }
}

Tensor ModalityEncoder::forward(const Tensor& batch, std::size_t batch_size, bool training,
                                Rng* rng) const {
  if (batch.cols() != config_.in_channels) {
    throw ShapeError("encoder expects " + std::to_string(config_.in_channels) +
                     " input channels, got " + to_string(batch.shape()));
  }
  if (batch_size == 0 || batch.rows() % batch_size != 0) {
    throw ShapeError("encoder batch of " + to_string(batch.shape()) + " does not hold " +
                     std::to_string(batch_size) + " sequences");
  }
  // Validates the stage arithmetic up front so the error names the stage.
  (void)config_.output_length(batch.rows() / batch_size);

  Tensor x = batch;
  std::size_t block = 0;
  for (const auto& s : config_.stages) {
    switch (s.kind) {
      case StageKind::conv: {
        const ConvBlock& b = blocks_[block++];
        x = matmul(unfold_time(x, batch_size, s.kernel, s.stride), b.weight);
        if (training) {
          auto bn = batch_norm_train(x, b.gamma, b.beta, config_.batch_norm_eps);
          const double m = config_.batch_norm_momentum;
          // Running statistics are buffers, not graph values.
          auto rm = Tensor(b.running_mean).mutable_values();
          auto rv = Tensor(b.running_var).mutable_values();
          for (std::size_t j = 0; j < rm.size(); ++j) {
            rm[j] = m * rm[j] + (1.0 - m) * bn.mean[j];
            rv[j] = m * rv[j] + (1.0 - m) * bn.variance[j];
          }
          x = std::move(bn.output);
        } else {
          const auto rm = b.running_mean.values();
          const auto rv = b.running_var.values();
          x = batch_norm_eval(x, b.gamma, b.beta, {rm.begin(), rm.end()}, {rv.begin(), rv.end()},
                              config_.batch_norm_eps);
        }
        x = relu(x);
        break;
      }
      case StageKind::max_pool:
        x = pool_time(x, batch_size, s.kernel, PoolKind::max);
        break;
      case StageKind::mean_pool:
        x = pool_time(x, batch_size, s.kernel, PoolKind::mean);
        break;
    }
  }
  if (training && config_.dropout_rate > 0.0) x = dropout(x, config_.dropout_rate, true, *rng);
  return x;
}

Tensor ModalityEncoder::encode_batch(const Tensor& batch, std::size_t batch_size, Rng& rng) {
  return forward(batch, batch_size, mode_ == Mode::training, &rng);
}

Tensor ModalityEncoder::encode_batch(const Tensor& batch, std::size_t batch_size) const {
  return forward(batch, batch_size, false, nullptr);
}

std::vector<NamedTensor> ModalityEncoder::parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto p = "encoder.conv" + std::to_string(i);
    out.push_back({p + ".weight", blocks_[i].weight});
    out.push_back({p + ".bn_gamma", blocks_[i].gamma});
    out.push_back({p + ".bn_beta", blocks_[i].beta});
  }
  return out;
}

std::vector<NamedTensor> ModalityEncoder::buffers() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto p = "encoder.conv" + std::to_string(i);
    out.push_back({p + ".running_mean", blocks_[i].running_mean});
    out.push_back({p + ".running_var", blocks_[i].running_var});
  }
  return out;
}

ClassifierHead ClassifierHead::init(std::size_t d_out, std::size_t classes, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(d_out));
  return {Tensor::uniform({d_out, classes}, -bound, bound, rng, true),
          Tensor::uniform({1, classes}, -bound, bound, rng, true)};
}

void ModelConfig::validate() const {
  encoder.validate();
  if (d_out == 0) throw std::invalid_argument("d_out must be positive");
  if (classes < 2) throw std::invalid_argument("a classifier needs at least 2 classes");
}

ModalityClassifier::ModalityClassifier(ModelConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  encoder_ = ModalityEncoder(config_.encoder, rng);
  attention_ = ProjectionWeights::init(config_.encoder.d_model(), config_.d_out, rng);
  head_ = ClassifierHead::init(config_.d_out, config_.classes, rng);
}

Tensor stack_windows(std::span<const Signal* const> batch) {
  if (batch.empty()) throw ShapeError("empty batch");
  const std::size_t t = batch.front()->length;
  const std::size_t c = batch.front()->channels;
  std::vector<double> values;
  values.reserve(batch.size() * t * c);
  for (const Signal* s : batch) {
    if (s->length != t || s->channels != c) {
      throw ShapeError("batch mixes window shapes [" + std::to_string(t) + "x" +
                       std::to_string(c) + "] and [" + std::to_string(s->length) + "x" +
                       std::to_string(s->channels) + "]");
    }
    const Signal n = min_max_normalize(*s);
    values.insert(values.end(), n.values.begin(), n.values.end());
  }
  return Tensor({batch.size() * t, c}, std::move(values));
}

ModalityClassifier::Output ModalityClassifier::run(std::span<const Signal* const> batch,
                                                   const Tensor& embeddings) const {
  const std::size_t n = batch.size();
  const std::size_t t_m = embeddings.rows() / n;
  const AttentionTriple all = project(embeddings, attention_);
  Output out;
  std::vector<Tensor> pooled;
  pooled.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    AttentionTriple tr{slice_rows(all.k, i * t_m, t_m), slice_rows(all.q, i * t_m, t_m),
                       slice_rows(all.v, i * t_m, t_m)};
    pooled.push_back(mean_over_rows(self_attention(tr)));
    out.triples.push_back(std::move(tr));
  }
  out.logits = add_row(matmul(concat_rows(pooled), head_.weight), head_.bias);
  return out;
}

ModalityClassifier::Output ModalityClassifier::forward(std::span<const Signal* const> batch,
                                                       Rng& rng) {
  const Tensor x = stack_windows(batch);
  return run(batch, encoder_.encode_batch(x, batch.size(), rng));
}

ModalityClassifier::Output ModalityClassifier::infer(std::span<const Signal* const> batch) const {
  const Tensor x = stack_windows(batch);
  return run(batch, encoder_.encode_batch(x, batch.size()));
}

std::vector<double> ModalityClassifier::classify(const Signal& raw) const {
  NoGradGuard guard;
  const Signal* one[] = {&raw};
  const auto out = infer(one);
  return {out.logits.values().begin(), out.logits.values().end()};
}

void ModalityClassifier::set_trainable(bool on) {
  for (auto& p : parameters()) {
    Tensor t = p.tensor;
    t.set_requires_grad(on);
  }
}

std::vector<NamedTensor> ModalityClassifier::parameters() const {
  auto out = encoder_.parameters();
  out.push_back({"attention.w_k", attention_.w_k});
  out.push_back({"attention.w_q", attention_.w_q});
  out.push_back({"attention.w_v", attention_.w_v});
  out.push_back({"head.weight", head_.weight});
  out.push_back({"head.bias", head_.bias});
  return out;
}

std::vector<NamedTensor> ModalityClassifier::buffers() const { return encoder_.buffers(); }

std::vector<NamedTensor> ModalityClassifier::state() const {
  auto out = parameters();
  for (auto& b : buffers()) out.push_back(std::move(b));
  return out;
}

void ModalityClassifier::load_state(std::span<const NamedTensor> source) {
  auto target = state();
  if (source.size() != target.size()) {
    throw std::invalid_argument("state has " + std::to_string(source.size()) +
                                " tensors, model expects " + std::to_string(target.size()));
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (source[i].name != target[i].name || source[i].tensor.shape() != target[i].tensor.shape()) {
      throw std::invalid_argument("state tensor '" + source[i].name + "' " +
                                  to_string(source[i].tensor.shape()) + " does not match '" +
                                  target[i].name + "' " + to_string(target[i].tensor.shape()));
    }
    auto dst = target[i].tensor.mutable_values();
    const auto src = source[i].tensor.values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

Tensor encode(const Signal& raw, const ModalityEncoder& encoder) {
  NoGradGuard guard;
  const Signal* one[] = {&raw};
  return encoder.encode_batch(stack_windows(one), 1);
}

ModalityClassifier clone(const ModalityClassifier& model) {
  Rng scratch(0);
  ModalityClassifier copy(model.config(), scratch);
  copy.load_state(model.state());
  copy.set_mode(model.mode());
  const auto src = model.parameters();
  const auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    Tensor t = dst[i].tensor;
    t.set_requires_grad(src[i].tensor.requires_grad());
  }
  return copy;
}

}  // namespace dcat
