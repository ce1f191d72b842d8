#include "dcat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "dcat/ablation.hpp"
#include "dcat/digest.hpp"

namespace dcat {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("expected true or false");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!non_negative_integer(*it)) throw ConfigError("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("expected a string");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      throw ConfigError(join(path_, key) + ": " + e.what());
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  [[nodiscard]] std::string at(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(join(path_, key) + ": unknown key");
    }
  }

 private:
  [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void validated(const std::string& block, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(block + ": " + e.what());
  }
}

std::string stage_kind_name(StageKind k) {
  switch (k) {
    case StageKind::conv:
      return "conv";
    case StageKind::max_pool:
      return "max_pool";
    case StageKind::mean_pool:
      return "mean_pool";
  }
  return "conv";
}

StageKind stage_kind_from(const std::string& s, const std::string& path) {
  if (s == "conv") return StageKind::conv;
  if (s == "max_pool") return StageKind::max_pool;
  if (s == "mean_pool") return StageKind::mean_pool;
  throw ConfigError(path + ": unknown stage kind '" + s + "' (expected conv, max_pool or mean_pool)");
}

json train_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},         {"learning_rate", t.learning_rate},
          {"batch_size", t.batch_size}, {"dropout", t.dropout},
          {"weight_decay", t.weight_decay}, {"d_out", t.d_out}};
}

void train_from_json(const json& j, const std::string& path, TrainConfig& t) {
  Reader r(j, path);
  r.get("epochs", t.epochs);
  r.get("learning_rate", t.learning_rate);
  r.get("batch_size", t.batch_size);
  r.get("dropout", t.dropout);
  r.get("weight_decay", t.weight_decay);
  r.get("d_out", t.d_out);
  r.finish();
}

}  // namespace

void WindowConfig::validate() const {
  if (length < 1) throw std::invalid_argument("window length must be >= 1");
  if (stride < 1) throw std::invalid_argument("window stride must be >= 1");
}

std::string TransferConfig::direction() const {
  return to_string(source) + "->" + to_string(target());
}

void TransferConfig::validate() const {
  if (lambda_grid.empty()) throw std::invalid_argument("lambda_grid must not be empty");
  for (double l : lambda_grid) {
    if (!(l >= 0.0)) throw std::invalid_argument("lambda_grid entries must be non-negative");
  }
  if (seeds.empty()) throw std::invalid_argument("seeds must not be empty");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
}

ExperimentConfig::ExperimentConfig() : encoder(EncoderConfig::imu_default(1)) {
  encoder.in_channels = 0;
  transfer.lambda_grid = kDefaultLambdaGrid;
  derive_seeds();
}

void ExperimentConfig::derive_seeds() {
  dataset.seed = seed;
  split.seed = seed + 1;
  source.seed = seed + 2;
}

void ExperimentConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  validated("dataset", [&] { dataset.validate(); });
  validated("window", [&] { window.validate(); });
  if (window.length > dataset.length) {
    throw ConfigError("window.length " + std::to_string(window.length) +
                      " exceeds dataset.length " + std::to_string(dataset.length));
  }
  validated("split", [&] { split.validate(); });
  validated("encoder", [&] {
    EncoderConfig e = encoder;
    e.in_channels = 1;
    e.validate();
    (void)e.output_length(window.length);
  });
  validated("source", [&] { source.validate(); });
  validated("target", [&] { target.validate(); });
  validated("transfer", [&] { transfer.validate(); });
  if (source.d_out != target.d_out) {
    throw ConfigError("source.d_out and target.d_out must match for signature alignment");
  }
}

json to_json(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  json stages = json::array();
  for (const auto& s : cfg.encoder.stages) {
    json js = {{"kind", stage_kind_name(s.kind)}, {"kernel", s.kernel}};
    if (s.kind == StageKind::conv) {
      js["stride"] = s.stride;
      js["out_channels"] = s.out_channels;
    }
    stages.push_back(js);
  }
  return {
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"dataset",
       {{"classes", d.classes},
        {"subjects", d.subjects},
        {"samples_per_cell", d.samples_per_cell},
        {"channels_a", d.channels_a},
        {"channels_b", d.channels_b},
        {"length", d.length},
        {"latent_dim", d.latent_dim},
        {"snr_a", d.snr_a},
        {"snr_b", d.snr_b},
        {"frequency_jitter", d.frequency_jitter},
        {"amplitude_jitter", d.amplitude_jitter},
        {"time_jitter", d.time_jitter},
        {"imbalance", d.imbalance}}},
      {"window", {{"length", cfg.window.length}, {"stride", cfg.window.stride}}},
      {"split",
       {{"kind", to_string(cfg.split.kind)},
        {"train", cfg.split.train},
        {"val", cfg.split.val},
        {"test", cfg.split.test}}},
      {"encoder",
       {{"stages", stages},
        {"batch_norm_momentum", cfg.encoder.batch_norm_momentum},
        {"batch_norm_eps", cfg.encoder.batch_norm_eps}}},
      {"source", train_to_json(cfg.source)},
      {"target", train_to_json(cfg.target)},
      {"transfer",
       {{"lambda_grid", cfg.transfer.lambda_grid},
        {"seeds", cfg.transfer.seeds},
        {"lambda", cfg.transfer.lambda},
        {"masking", cfg.transfer.masking_enabled},
        {"direction", cfg.transfer.direction()}}},
  };
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig cfg;
  Reader root(j, "");
  root.get("seed", cfg.seed);
  root.get("output_dir", cfg.output_dir);

  if (const json* d = root.child("dataset")) {
    Reader r(*d, "dataset");
    auto& ds = cfg.dataset;
    r.get("classes", ds.classes);
    r.get("subjects", ds.subjects);
    r.get("samples_per_cell", ds.samples_per_cell);
    r.get("channels_a", ds.channels_a);
    r.get("channels_b", ds.channels_b);
    r.get("length", ds.length);
    r.get("latent_dim", ds.latent_dim);
    r.get("snr_a", ds.snr_a);
    r.get("snr_b", ds.snr_b);
    r.get("frequency_jitter", ds.frequency_jitter);
    r.get("amplitude_jitter", ds.amplitude_jitter);
    r.get("time_jitter", ds.time_jitter);
    r.get("imbalance", ds.imbalance);
    r.finish();
  }
  if (const json* w = root.child("window")) {
    Reader r(*w, "window");
    r.get("length", cfg.window.length);
    r.get("stride", cfg.window.stride);
    r.finish();
  }
  if (const json* s = root.child("split")) {
    Reader r(*s, "split");
    std::string kind = to_string(cfg.split.kind);
    r.get("kind", kind);
    try {
      cfg.split.kind = split_kind_from_string(kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(r.at("kind") + ": " + e.what());
    }
    r.get("train", cfg.split.train);
    r.get("val", cfg.split.val);
    r.get("test", cfg.split.test);
    r.finish();
  }
  if (const json* e = root.child("encoder")) {
    Reader r(*e, "encoder");
    if (const json* stages = r.child("stages")) {
      if (!stages->is_array()) throw ConfigError("encoder.stages: expected an array");
      cfg.encoder.stages.clear();
      for (std::size_t i = 0; i < stages->size(); ++i) {
        const std::string path = "encoder.stages[" + std::to_string(i) + "]";
        Reader sr((*stages)[i], path);
        std::string kind = "conv";
        EncoderStage st;
        sr.get("kind", kind);
        st.kind = stage_kind_from(kind, sr.at("kind"));
        sr.get("kernel", st.kernel);
        sr.get("stride", st.stride);
        sr.get("out_channels", st.out_channels);
        sr.finish();
        cfg.encoder.stages.push_back(st);
      }
    }
    r.get("batch_norm_momentum", cfg.encoder.batch_norm_momentum);
    r.get("batch_norm_eps", cfg.encoder.batch_norm_eps);
    r.finish();
  }
  if (const json* s = root.child("source")) train_from_json(*s, "source", cfg.source);
  if (const json* t = root.child("target")) train_from_json(*t, "target", cfg.target);
  if (const json* t = root.child("transfer")) {
    Reader r(*t, "transfer");
    auto& tr = cfg.transfer;
    if (const json* grid = r.child("lambda_grid")) {
      if (!grid->is_array()) throw ConfigError("transfer.lambda_grid: expected an array");
      tr.lambda_grid.clear();
      for (const auto& v : *grid) {
        if (!v.is_number()) throw ConfigError("transfer.lambda_grid: expected numbers");
        tr.lambda_grid.push_back(v.get<double>());
      }
    }
    if (const json* seeds = r.child("seeds")) {
      if (!seeds->is_array()) throw ConfigError("transfer.seeds: expected an array");
      tr.seeds.clear();
      for (const auto& v : *seeds) {
        if (!non_negative_integer(v)) throw ConfigError("transfer.seeds: expected non-negative integers");
        tr.seeds.push_back(v.get<std::uint64_t>());
      }
    }
    r.get("lambda", tr.lambda);
    r.get("masking", tr.masking_enabled);
    std::string direction = tr.direction();
    r.get("direction", direction);
    if (direction == "A->B") {
      tr.source = Modality::a;
    } else if (direction == "B->A") {
      tr.source = Modality::b;
    } else {
      throw ConfigError("transfer.direction: expected \"A->B\" or \"B->A\", got \"" + direction + "\"");
    }
    r.finish();
  }
  root.finish();
  cfg.derive_seeds();
  cfg.validate();
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return experiment_from_json(read_json_file(path));
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::string walked;
  while (std::getline(ss, part, '.')) {
    walked = join(walked, part);
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("override '" + assignment + "': unknown key " + walked);
    }
    node = &(*node)[part];
  }
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  *node = value;
}

std::string json_hash(const json& j) { return sha256_hex(j.dump()); }

std::string dataset_hash(const ExperimentConfig& cfg) {
  const json full = to_json(cfg);
  return json_hash({{"seed", cfg.seed}, {"dataset", full["dataset"]}, {"split", full["split"]}});
}

}  // namespace dcat
