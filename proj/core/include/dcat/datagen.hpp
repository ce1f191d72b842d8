#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dcat {

/// Multichannel time series, row-major length x channels.
struct Signal {
  std::size_t length = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  Signal() = default;
  Signal(std::size_t length, std::size_t channels, double fill = 0.0)
      : length(length), channels(channels), values(length * channels, fill) {}

  [[nodiscard]] double at(std::size_t t, std::size_t c) const { return values[t * channels + c]; }
  double& at(std::size_t t, std::size_t c) { return values[t * channels + c]; }
  friend bool operator==(const Signal&, const Signal&) = default;
};

enum class Waveform { sine, triangle, square, sawtooth };

/// One periodic component of a class's latent trajectory.
struct LatentComponent {
  double frequency = 0.0;  // cycles per sample
  double amplitude = 0.0;
  Waveform shape = Waveform::sine;
  std::vector<double> channel_phase;  // one per latent dimension
};

struct ActivityClass {
  int id = 0;
  std::vector<LatentComponent> components;
  double envelope_depth = 0.0;
  double envelope_frequency = 0.0;
};

struct SubjectProfile {
  int subject_id = 0;
  std::vector<double> gain_a;
  std::vector<double> gain_b;
  double phase_offset = 0.0;
  double noise_scale = 1.0;
};

/// Synchronized views of one latent activity realization.
struct PairedSample {
  std::uint64_t sample_id = 0;
  std::uint64_t parent_id = 0;  // recording the sample was windowed from
  Signal raw_a;                 // rich modality
  Signal raw_b;                 // weak modality
  int label = 0;
  int subject_id = 0;
};

struct DatasetConfig {
  std::size_t classes = 8;
  std::size_t subjects = 10;
  std::size_t samples_per_cell = 10;
  std::size_t channels_a = 12;
  std::size_t channels_b = 6;
  std::size_t length = 140;
  std::size_t latent_dim = 4;
  double snr_a = 4.0;
  double snr_b = 0.6;
  // Relative per-sample jitter of frequency and amplitude.
  double frequency_jitter = 0.04;
  double amplitude_jitter = 0.15;
  // Each recording starts at a random time in [0, time_jitter) samples.
  double time_jitter = 1000.0;
  // Fraction of cells dropped for the rarest classes; 0 keeps classes balanced.
  double imbalance = 0.0;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Class and subject parameters drawn from the config seed, shared by every
/// sample of the dataset.
struct DatasetStructure {
  std::vector<ActivityClass> classes;
  std::vector<SubjectProfile> subjects;
  std::vector<double> mixing_a;  // channels_a x latent_dim
  std::vector<double> mixing_b;  // channels_b x latent_dim
};

DatasetStructure make_structure(const DatasetConfig& cfg);

/// Latent trajectory z(t) for one realization: length x latent_dim.
Signal latent_trajectory(const ActivityClass& cls, std::size_t length, double time_offset,
                         double frequency_scale, double amplitude_scale, std::size_t latent_dim);

/// Generates classes x subjects x samples_per_cell paired recordings.
/// A non-finite snr produces noiseless views.
std::vector<PairedSample> generate(const DatasetConfig& cfg);

enum class SplitKind { id, ood };

struct SplitSpec {
  SplitKind kind = SplitKind::id;
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 11;

  void validate() const;
};

struct Splits {
  std::vector<PairedSample> train;
  std::vector<PairedSample> val;
  std::vector<PairedSample> test;
};

/// ID: stratified by label. OOD: subjects are partitioned first so that the
/// three parts share no subject.
Splits split(const std::vector<PairedSample>& dataset, const SplitSpec& spec);

/// Start offsets of floor((T - len)/stride) + 1 windows.
std::vector<std::size_t> window_starts(std::size_t length, std::size_t window_len,
                                       std::size_t stride);

std::vector<Signal> window(const Signal& signal, std::size_t window_len, std::size_t stride);

/// Windows both views identically. Children keep the label and subject and
/// record the parent id; child ids are parent_id * 1000 + window index.
std::vector<PairedSample> window(const PairedSample& sample, std::size_t window_len,
                                 std::size_t stride);
std::vector<PairedSample> window_all(std::span<const PairedSample> samples,
                                     std::size_t window_len, std::size_t stride);

/// Per-channel affine map of [min, max] onto [-1, 1]; constant channels map to 0.
Signal min_max_normalize(const Signal& x);

std::string to_string(SplitKind kind);
SplitKind split_kind_from_string(const std::string& s);

}  // namespace dcat
