#include "dcat/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include "dcat/tensor.hpp"

namespace dcat {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double waveform(Waveform shape, double theta) {
  switch (shape) {
    case Waveform::sine:
      return std::sin(theta);
    case Waveform::triangle:
      return (2.0 / std::numbers::pi) * std::asin(std::sin(theta));
    case Waveform::square:
      return std::tanh(3.0 * std::sin(theta));
    case Waveform::sawtooth: {
      const double x = theta / kTwoPi;
      return 2.0 * (x - std::floor(x + 0.5));
    }
  }
  return 0.0;
}

// Apportions `total` items over groups of the given sizes so each group gets
// floor(ratio*size) or one more, using largest remainders.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, double ratio,
                                   std::size_t total, const std::vector<std::size_t>& caps) {
  std::vector<std::size_t> out(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double exact = ratio * static_cast<double>(sizes[i]);
    out[i] = std::min(static_cast<std::size_t>(std::floor(exact)), caps[i]);
    assigned += out[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [rem, i] : remainders) {
    if (assigned >= total) break;
    if (out[i] < caps[i]) {
      ++out[i];
      ++assigned;
    }
  }
  return out;
}

}  // namespace

void DatasetConfig::validate() const {
  if (classes < 2) throw std::invalid_argument("dataset needs at least 2 classes");
  if (subjects < 1 || samples_per_cell < 1) {
    throw std::invalid_argument("dataset needs at least one subject and one sample per cell");
  }
  if (channels_a < 1 || channels_b < 1 || latent_dim < 1 || length < 1) {
    throw std::invalid_argument("dataset channel counts and length must be positive");
  }
  if (!(snr_a > 0.0) || !(snr_b > 0.0)) throw std::invalid_argument("snr values must be positive");
  if (frequency_jitter < 0.0 || amplitude_jitter < 0.0 || frequency_jitter >= 1.0 ||
      amplitude_jitter >= 1.0) {
    throw std::invalid_argument("jitter values must lie in [0, 1)");
  }
  if (time_jitter < 0.0) throw std::invalid_argument("time_jitter must be non-negative");
  if (imbalance < 0.0 || imbalance >= 1.0) throw std::invalid_argument("imbalance must lie in [0, 1)");
}

DatasetStructure make_structure(const DatasetConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  DatasetStructure s;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    ActivityClass cls;
    cls.id = static_cast<int>(c);
    const int n_components = u(rng) < 0.5 ? 2 : 3;
    for (int j = 0; j < n_components; ++j) {
      LatentComponent comp;
      // 1.5 to 9 cycles per 70 samples.
      comp.frequency = uniform(1.5, 9.0) / 70.0;
      comp.amplitude = uniform(0.5, 1.0);
      comp.shape = static_cast<Waveform>(static_cast<int>(u(rng) * 4.0) % 4);
      for (std::size_t l = 0; l < cfg.latent_dim; ++l) comp.channel_phase.push_back(uniform(0.0, kTwoPi));
      cls.components.push_back(std::move(comp));
    }
    cls.envelope_depth = uniform(0.0, 0.5);
    cls.envelope_frequency = uniform(0.5, 2.0) / 70.0;
    s.classes.push_back(std::move(cls));
  }
  for (std::size_t k = 0; k < cfg.subjects; ++k) {
    SubjectProfile p;
    p.subject_id = static_cast<int>(k);
    for (std::size_t ch = 0; ch < cfg.channels_a; ++ch) p.gain_a.push_back(uniform(0.7, 1.3));
    for (std::size_t ch = 0; ch < cfg.channels_b; ++ch) p.gain_b.push_back(uniform(0.7, 1.3));
    p.phase_offset = uniform(0.0, kTwoPi);
    p.noise_scale = uniform(0.8, 1.2);
    s.subjects.push_back(std::move(p));
  }
  const double mix_scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  s.mixing_a.resize(cfg.channels_a * cfg.latent_dim);
  s.mixing_b.resize(cfg.channels_b * cfg.latent_dim);
  for (auto& m : s.mixing_a) m = normal(rng) * mix_scale;
  for (auto& m : s.mixing_b) m = normal(rng) * mix_scale;
  return s;
}

Signal latent_trajectory(const ActivityClass& cls, std::size_t length, double time_offset,
                         double frequency_scale, double amplitude_scale, std::size_t latent_dim) {
  Signal z(length, latent_dim);
  for (std::size_t t = 0; t < length; ++t) {
    const double time = static_cast<double>(t) + time_offset;
    const double env =
        1.0 + cls.envelope_depth * std::sin(kTwoPi * cls.envelope_frequency * time);
    for (std::size_t l = 0; l < latent_dim; ++l) {
      double acc = 0.0;
      for (const auto& comp : cls.components) {
        const double theta = kTwoPi * comp.frequency * frequency_scale * time + comp.channel_phase[l];
        acc += comp.amplitude * waveform(comp.shape, theta);
      }
      z.at(t, l) = env * amplitude_scale * acc;
    }
  }
  return z;
}

namespace {

Signal render_view(const Signal& z, const std::vector<double>& mixing,
                   const std::vector<double>& gain, double noise_std, Rng& rng) {
  const std::size_t channels = gain.size();
  Signal out(z.length, channels);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t t = 0; t < z.length; ++t)
    for (std::size_t ch = 0; ch < channels; ++ch) {
      double acc = 0.0;
      for (std::size_t l = 0; l < z.channels; ++l) acc += mixing[ch * z.channels + l] * z.at(t, l);
      out.at(t, ch) = gain[ch] * acc;
    }
  if (noise_std > 0.0) {
    for (auto& v : out.values) v += noise_std * normal(rng);
  }
  return out;
}

}  // namespace

std::vector<PairedSample> generate(const DatasetConfig& cfg) {
  const DatasetStructure s = make_structure(cfg);
  // Realizations draw from a stream independent of the structure stream.
  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> offset(0.0, 1.0);
  const double noise_a = std::isfinite(cfg.snr_a) ? 1.0 / cfg.snr_a : 0.0;
  const double noise_b = std::isfinite(cfg.snr_b) ? 1.0 / cfg.snr_b : 0.0;

  std::vector<PairedSample> out;
  std::uint64_t next_id = 1;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const double keep =
        cfg.classes > 1 ? 1.0 - cfg.imbalance * static_cast<double>(c) / static_cast<double>(cfg.classes - 1)
                        : 1.0;
    const std::size_t per_cell = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(keep * static_cast<double>(cfg.samples_per_cell))));
    for (const auto& subject : s.subjects) {
      for (std::size_t i = 0; i < per_cell; ++i) {
        const double freq_scale = 1.0 + cfg.frequency_jitter * u(rng);
        const double amp_scale = 1.0 + cfg.amplitude_jitter * u(rng);
        // Subject phase expressed as a time shift of one slow period.
        const double t0 = cfg.time_jitter * offset(rng) + subject.phase_offset / kTwoPi * 70.0;
        const Signal z = latent_trajectory(s.classes[c], cfg.length, t0, freq_scale, amp_scale,
                                           cfg.latent_dim);
        PairedSample p;
        p.sample_id = next_id++;
        p.parent_id = p.sample_id;
        p.label = static_cast<int>(c);
        p.subject_id = subject.subject_id;
        p.raw_a = render_view(z, s.mixing_a, subject.gain_a, noise_a * subject.noise_scale, rng);
        p.raw_b = render_view(z, s.mixing_b, subject.gain_b, noise_b * subject.noise_scale, rng);
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

void SplitSpec::validate() const {
  if (!(train > 0.0) || !(val > 0.0) || !(test > 0.0)) {
    throw std::invalid_argument("split ratios must be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
}

Splits split(const std::vector<PairedSample>& dataset, const SplitSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Splits out;
  if (spec.kind == SplitKind::ood) {
    std::set<int> subject_set;
    for (const auto& s : dataset) subject_set.insert(s.subject_id);
    std::vector<int> subjects(subject_set.begin(), subject_set.end());
    const std::size_t n = subjects.size();
    if (n < 3) {
      throw std::invalid_argument("OOD split needs at least 3 subjects, dataset has " +
                                  std::to_string(n));
    }
    std::shuffle(subjects.begin(), subjects.end(), rng);
    auto n_train = static_cast<std::size_t>(std::lround(spec.train * static_cast<double>(n)));
    auto n_val = static_cast<std::size_t>(std::lround(spec.val * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
    n_val = std::clamp<std::size_t>(n_val, 1, n - n_train - 1);
    std::map<int, int> part;
    for (std::size_t i = 0; i < n; ++i) part[subjects[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    for (const auto& s : dataset) {
      const int p = part[s.subject_id];
      (p == 0 ? out.train : p == 1 ? out.val : out.test).push_back(s);
    }
    return out;
  }

  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_label[dataset[i].label].push_back(i);
  std::vector<std::size_t> sizes;
  for (auto& [label, idx] : by_label) {
    std::shuffle(idx.begin(), idx.end(), rng);
    sizes.push_back(idx.size());
  }
  const double n = static_cast<double>(dataset.size());
  const auto n_train = static_cast<std::size_t>(std::lround(spec.train * n));
  const auto n_val = static_cast<std::size_t>(std::lround(spec.val * n));
  const auto train_q = apportion(sizes, spec.train, n_train, sizes);
  std::vector<std::size_t> rest(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) rest[i] = sizes[i] - train_q[i];
  const auto val_q = apportion(sizes, spec.val, n_val, rest);

  std::vector<std::size_t> train_idx, val_idx, test_idx;
  std::size_t k = 0;
  for (const auto& [label, idx] : by_label) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < train_q[k]) train_idx.push_back(idx[i]);
      else if (i < train_q[k] + val_q[k]) val_idx.push_back(idx[i]);
      else test_idx.push_back(idx[i]);
    }
    ++k;
  }
  // Interleave classes inside each part.
  std::shuffle(train_idx.begin(), train_idx.end(), rng);
  std::shuffle(val_idx.begin(), val_idx.end(), rng);
  std::shuffle(test_idx.begin(), test_idx.end(), rng);
  for (auto i : train_idx) out.train.push_back(dataset[i]);
  for (auto i : val_idx) out.val.push_back(dataset[i]);
  for (auto i : test_idx) out.test.push_back(dataset[i]);
  return out;
}

std::vector<std::size_t> window_starts(std::size_t length, std::size_t window_len,
                                       std::size_t stride) {
  if (window_len == 0 || stride == 0) throw std::invalid_argument("window length and stride must be positive");
  if (window_len > length) {
    throw std::invalid_argument("window of " + std::to_string(window_len) +
                                " samples is longer than the signal (" + std::to_string(length) + ")");
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window_len <= length; s += stride) starts.push_back(s);
  return starts;
}

std::vector<Signal> window(const Signal& signal, std::size_t window_len, std::size_t stride) {
  std::vector<Signal> out;
  for (std::size_t start : window_starts(signal.length, window_len, stride)) {
    Signal w(window_len, signal.channels);
    std::copy_n(signal.values.begin() + static_cast<std::ptrdiff_t>(start * signal.channels),
                window_len * signal.channels, w.values.begin());
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<PairedSample> window(const PairedSample& sample, std::size_t window_len,
                                 std::size_t stride) {
  if (sample.raw_a.length != sample.raw_b.length) {
    throw std::invalid_argument("paired views have different lengths");
  }
  auto wa = window(sample.raw_a, window_len, stride);
  auto wb = window(sample.raw_b, window_len, stride);
  std::vector<PairedSample> out;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    PairedSample p;
    p.sample_id = sample.parent_id * 1000 + i;
    p.parent_id = sample.parent_id;
    p.raw_a = std::move(wa[i]);
    p.raw_b = std::move(wb[i]);
    p.label = sample.label;
    p.subject_id = sample.subject_id;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PairedSample> window_all(std::span<const PairedSample> samples, std::size_t window_len,
                                     std::size_t stride) {
  std::vector<PairedSample> out;
  for (const auto& s : samples) {
    auto w = window(s, window_len, stride);
    std::move(w.begin(), w.end(), std::back_inserter(out));
  }
  return out;
}

Signal min_max_normalize(const Signal& x) {
  Signal out = x;
  for (std::size_t c = 0; c < x.channels; ++c) {
    double lo = x.at(0, c), hi = x.at(0, c);
    for (std::size_t t = 1; t < x.length; ++t) {
      lo = std::min(lo, x.at(t, c));
      hi = std::max(hi, x.at(t, c));
    }
    const double range = hi - lo;
    for (std::size_t t = 0; t < x.length; ++t) {
      if (range == 0.0) {
        out.at(t, c) = 0.0;
      } else if (x.at(t, c) == hi) {
        out.at(t, c) = 1.0;
      } else {
        out.at(t, c) = 2.0 * (x.at(t, c) - lo) / range - 1.0;
      }
    }
  }
  return out;
}

std::string to_string(SplitKind kind) { return kind == SplitKind::id ? "ID" : "OOD"; }

SplitKind split_kind_from_string(const std::string& s) {
  if (s == "ID" || s == "id") return SplitKind::id;
  if (s == "OOD" || s == "ood") return SplitKind::ood;
  throw std::invalid_argument("unknown split kind '" + s + "' (expected ID or OOD)");
}

}  // namespace dcat
