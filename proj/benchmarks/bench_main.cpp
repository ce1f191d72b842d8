#include <benchmark/benchmark.h>

#include "dcat/attention.hpp"
#include "dcat/losses.hpp"
#include "dcat/ops.hpp"
#include "dcat/training.hpp"

using namespace dcat;

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = Tensor::uniform({n, n}, -1, 1, rng), b = Tensor::uniform({n, n}, -1, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256)->Complexity();

static void BM_SelfAttentionForwardBackward(benchmark::State& state) {
  const auto d_out = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Tensor e = Tensor::uniform({14, 32}, -1, 1, rng);
  auto w = ProjectionWeights::init(32, d_out, rng);
  for (auto _ : state) {
    auto t = project(e, w);
    Tensor y = sum(self_attention(t));
    y.backward();
    w.w_k.clear_grad();
    w.w_q.clear_grad();
    w.w_v.clear_grad();
  }
}
BENCHMARK(BM_SelfAttentionForwardBackward)->Arg(32)->Arg(128)->Arg(512);

static void BM_AlignmentLoss(benchmark::State& state) {
  const auto d_out = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  AttentionSignature a{Tensor::uniform({d_out, d_out}, -1, 1, rng)};
  AttentionSignature b{Tensor::uniform({d_out, d_out}, -1, 1, rng, true)};
  for (auto _ : state) {
    Tensor l = cross_attention_loss(b, a);
    l.backward();
    b.sig.clear_grad();
  }
}
BENCHMARK(BM_AlignmentLoss)->Arg(32)->Arg(512);

static void BM_TrainingStep(benchmark::State& state) {
  const bool align = state.range(0) != 0;
  DatasetConfig dc;
  dc.subjects = 2;
  dc.samples_per_cell = 1;
  auto windows = window_all(generate(dc), 70, 70);
  std::vector<const Signal*> a, b;
  std::vector<int> labels;
  for (std::size_t i = 0; i < 16; ++i) {
    a.push_back(&windows[i].raw_a);
    b.push_back(&windows[i].raw_b);
    labels.push_back(windows[i].label);
  }
  TrainConfig cfg;
  cfg.d_out = 32;
  cfg.dropout = 0.0;
  Rng rng(4);
  auto src_model = ModalityClassifier(make_model_config(EncoderConfig::imu_default(0), dc.channels_a, cfg, dc.classes), rng);
  auto source = FrozenSourceModel::freeze(std::move(src_model), Modality::a);
  ModalityClassifier target(make_model_config(EncoderConfig::imu_default(0), dc.channels_b, cfg, dc.classes), rng);
  OptimizerState opt;
  const auto params = target.parameters();
  for (auto _ : state) {
    auto out = target.forward(b, rng);
    Tensor loss = cross_entropy(out.logits, labels);
    if (align) {
      ModalityClassifier::Output src;
      {
        NoGradGuard guard;
        src = source.model.infer(a);
      }
      std::vector<AttentionSignature> sa, sb;
      for (std::size_t i = 0; i < b.size(); ++i) {
        sa.push_back(signature(src.triples[i].k, src.triples[i].v));
        sb.push_back(signature(out.triples[i].k, out.triples[i].v));
      }
      auto mask = compute_mask(src.logits, labels);
      loss = add(loss, masked_cross_attention_loss(sb, sa, mask));
    }
    for (const auto& p : params) Tensor(p.tensor).clear_grad();
    loss.backward();
    adam_step(params, opt, 1e-3, 0.0);
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_TrainingStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
