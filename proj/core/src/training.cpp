#include "dcat/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "dcat/attention.hpp"
#include "dcat/digest.hpp"

namespace dcat {

namespace {

constexpr std::size_t kEvalBatch = 64;

std::vector<const Signal*> views(std::span<const PairedSample> samples,
                                 std::span<const std::size_t> idx, Modality m) {
  std::vector<const Signal*> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(&view(samples[i], m));
  return out;
}

// Shared loop for source pretraining and target training.
RunLog fit(const TrainConfig& cfg, ModalityClassifier& model, Modality modality,
           const TrainingData& data, const FrozenSourceModel* source, Rng& rng,
           const EpochCallback& on_epoch) {
  if (data.train.size() < cfg.batch_size) {
    throw std::invalid_argument("training split holds " + std::to_string(data.train.size()) +
                                " samples, fewer than one batch of " +
                                std::to_string(cfg.batch_size));
  }
  LossConfig loss_cfg;
  loss_cfg.lambda = source ? cfg.lambda : 0.0;
  loss_cfg.masking_enabled = cfg.masking_enabled;
  loss_cfg.validate();
  const bool align = source != nullptr && (cfg.lambda > 0.0 || cfg.alignment_only);

  const auto params = model.parameters();
  OptimizerState opt;
  RunLog log;
  std::optional<ModalityClassifier> best;
  double best_f1 = -1.0;

  std::vector<std::size_t> order(data.train.size());
  const std::size_t steps_per_epoch = data.train.size() / cfg.batch_size;  // drop last

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    model.set_mode(Mode::training);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lambda = loss_cfg.lambda;
    std::size_t masked_in = 0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::span<const std::size_t> idx(order.data() + s * cfg.batch_size, cfg.batch_size);
      std::vector<int> labels;
      for (auto i : idx) labels.push_back(data.train[i].label);

      const auto batch = views(data.train, idx, modality);
      const auto out = model.forward(batch, rng);
      Tensor ce = cross_entropy(out.logits, labels);

      Tensor ca = Tensor::scalar(0.0);
      std::size_t count = 0;
      if (align) {
        std::vector<AttentionSignature> sig_a;
        CorrectnessMask mask;
        {
          NoGradGuard guard;
          const auto src = source->model.infer(views(data.train, idx, source->modality));
          mask = cfg.masking_enabled ? compute_mask(src.logits, labels)
                                     : CorrectnessMask::all(idx.size(), true);
          for (const auto& t : src.triples) sig_a.push_back(signature(t.k, t.v));
        }
        std::vector<AttentionSignature> sig_b;
        for (const auto& t : out.triples) sig_b.push_back(signature(t.k, t.v));
        ca = masked_cross_attention_loss(sig_b, sig_a, mask, loss_cfg);
        count = mask.count();
      }

      TotalLoss total;
      if (cfg.alignment_only) {
        total.breakdown = {ce.item(), ca.item(), loss_cfg.lambda, ca.item(), count};
        total.total = ca;
      } else {
        total = total_loss(ce, ca, count, loss_cfg);
      }

      for (const auto& p : params) Tensor(p.tensor).clear_grad();
      backward(total.total);
      adam_step(params, opt, cfg.learning_rate, cfg.weight_decay);

      rec.l_ce += total.breakdown.l_ce;
      rec.l_ca += total.breakdown.l_ca;
      rec.total += total.breakdown.total;
      masked_in += count;
      log.steps.push_back(total.breakdown);
    }
    const double n_steps = static_cast<double>(steps_per_epoch);
    rec.l_ce /= n_steps;
    rec.l_ca /= n_steps;
    rec.total /= n_steps;
    rec.masked_in_fraction =
        align ? static_cast<double>(masked_in) / (n_steps * static_cast<double>(cfg.batch_size)) : 0.0;

    model.set_mode(Mode::eval);
    rec.val = evaluate(model, modality, data.val, data.classes);
    if (rec.val.macro_f1 > best_f1) {
      best_f1 = rec.val.macro_f1;
      best = clone(model);
      log.best_epoch = epoch;
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  model.load_state(best->state());
  model.set_mode(Mode::eval);
  return log;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (d_out < 1) throw std::invalid_argument("d_out must be >= 1");
}

const Signal& view(const PairedSample& s, Modality m) { return m == Modality::a ? s.raw_a : s.raw_b; }

std::string to_string(Modality m) { return m == Modality::a ? "A" : "B"; }

Modality modality_from_string(const std::string& s) {
  if (s == "A" || s == "a") return Modality::a;
  if (s == "B" || s == "b") return Modality::b;
  throw std::invalid_argument("unknown modality '" + s + "' (expected A or B)");
}

void adam_step(std::span<const NamedTensor> params, OptimizerState& state, double lr,
               double weight_decay) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.tensor.size(), 0.0);
      state.second_moment.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("optimizer state tracks " +
                                std::to_string(state.first_moment.size()) + " parameters, got " +
                                std::to_string(params.size()));
  }
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = params[k].tensor;
    auto w = t.mutable_values();
    const auto g = t.grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      w[i] -= lr * weight_decay * w[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

FrozenSourceModel FrozenSourceModel::freeze(ModalityClassifier model, Modality modality) {
  model.set_mode(Mode::eval);
  model.set_trainable(false);
  FrozenSourceModel f{std::move(model), modality, {}};
  f.digest = f.current_digest();
  return f;
}

std::string FrozenSourceModel::current_digest() const { return state_digest(model.state()); }

ModelConfig make_model_config(const EncoderConfig& encoder_template, std::size_t in_channels,
                              const TrainConfig& cfg, std::size_t classes) {
  ModelConfig mc;
  mc.encoder = encoder_template;
  mc.encoder.in_channels = in_channels;
  mc.encoder.dropout_rate = cfg.dropout;
  mc.d_out = cfg.d_out;
  mc.classes = classes;
  return mc;
}

PretrainResult pretrain_source(const TrainConfig& cfg, const EncoderConfig& encoder_template,
                               Modality modality, const TrainingData& data,
                               const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw std::invalid_argument("empty training split");
  Rng rng(cfg.seed);
  const std::size_t channels = view(data.train.front(), modality).channels;
  ModalityClassifier model(make_model_config(encoder_template, channels, cfg, data.classes), rng);
  RunLog log = fit(cfg, model, modality, data, nullptr, rng, on_epoch);
  return {FrozenSourceModel::freeze(std::move(model), modality), std::move(log)};
}

TrainedModel train_target(const TrainConfig& cfg, const EncoderConfig& encoder_template,
                          const FrozenSourceModel* source, Modality target_modality,
                          const TrainingData& data, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw std::invalid_argument("empty training split");
  if (source && source->model.config().d_out != cfg.d_out) {
    throw std::invalid_argument("source d_out " + std::to_string(source->model.config().d_out) +
                                " differs from target d_out " + std::to_string(cfg.d_out));
  }
  Rng rng(cfg.seed);
  const std::size_t channels = view(data.train.front(), target_modality).channels;
  ModalityClassifier model(make_model_config(encoder_template, channels, cfg, data.classes), rng);
  RunLog log = fit(cfg, model, target_modality, data, source, rng, on_epoch);
  return {std::move(model), target_modality, std::move(log)};
}

MetricsReport evaluate(const Predictor& predictor, std::span<const PairedSample> split,
                       std::size_t classes) {
  const std::vector<int> preds = predictor(split);
  std::vector<int> labels;
  labels.reserve(split.size());
  for (const auto& s : split) labels.push_back(s.label);
  return macro_metrics(preds, labels, classes);
}

std::vector<int> predict(const ModalityClassifier& model, Modality modality,
                         std::span<const PairedSample> samples) {
  NoGradGuard guard;
  std::vector<int> preds;
  preds.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += kEvalBatch) {
    const std::size_t n = std::min(kEvalBatch, samples.size() - start);
    std::vector<const Signal*> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back(&view(samples[start + i], modality));
    const auto out = model.infer(batch);
    const auto p = argmax_rows(out.logits);
    preds.insert(preds.end(), p.begin(), p.end());
  }
  return preds;
}

MetricsReport evaluate(const ModalityClassifier& model, Modality modality,
                       std::span<const PairedSample> split, std::size_t classes) {
  return evaluate([&](std::span<const PairedSample> s) { return predict(model, modality, s); },
                  split, classes);
}

}  // namespace dcat
