#include "dcat/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "dcat/digest.hpp"

namespace dcat {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic{'D', 'C', 'A', 'T', 'C', 'K', 'P', 'T'};

std::string stage_kind(StageKind k) {
  return k == StageKind::conv ? "conv" : (k == StageKind::max_pool ? "max_pool" : "mean_pool");
}

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (in.gcount() != sizeof v) throw CorruptCheckpointError(path.string() + ": truncated checkpoint");
  return v;
}

}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
  json stages = json::array();
  for (const auto& s : cfg.encoder.stages) {
    stages.push_back({{"kind", stage_kind(s.kind)},
                      {"kernel", s.kernel},
                      {"stride", s.stride},
                      {"out_channels", s.out_channels}});
  }
  return {{"encoder",
           {{"in_channels", cfg.encoder.in_channels},
            {"stages", stages},
            {"batch_norm_momentum", cfg.encoder.batch_norm_momentum},
            {"batch_norm_eps", cfg.encoder.batch_norm_eps},
            {"dropout_rate", cfg.encoder.dropout_rate}}},
          {"d_out", cfg.d_out},
          {"classes", cfg.classes}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  const auto& e = j.at("encoder");
  cfg.encoder.in_channels = e.at("in_channels").get<std::size_t>();
  for (const auto& s : e.at("stages")) {
    EncoderStage st;
    const auto kind = s.at("kind").get<std::string>();
    st.kind = kind == "conv" ? StageKind::conv
                             : (kind == "max_pool" ? StageKind::max_pool : StageKind::mean_pool);
    st.kernel = s.at("kernel").get<std::size_t>();
    st.stride = s.at("stride").get<std::size_t>();
    st.out_channels = s.at("out_channels").get<std::size_t>();
    cfg.encoder.stages.push_back(st);
  }
  cfg.encoder.batch_norm_momentum = e.at("batch_norm_momentum").get<double>();
  cfg.encoder.batch_norm_eps = e.at("batch_norm_eps").get<double>();
  cfg.encoder.dropout_rate = e.at("dropout_rate").get<double>();
  cfg.d_out = j.at("d_out").get<std::size_t>();
  cfg.classes = j.at("classes").get<std::size_t>();
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const ModalityClassifier& model,
                     Modality modality, const json& meta) {
  const auto state = model.state();
  json tensors = json::array();
  for (const auto& [name, t] : state) tensors.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  const json header = {{"config", model_config_to_json(model.config())},
                       {"modality", to_string(modality)},
                       {"tensors", tensors},
                       {"digest", state_digest(state)},
                       {"meta", meta}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& nt : state) {
    const auto v = nt.tensor.values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic) {
    throw CorruptCheckpointError(path.string() + ": not a checkpoint file");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw CorruptCheckpointError(path.string() + ": unsupported checkpoint version " +
                                 std::to_string(version));
  }
  const auto header_len = read_pod<std::uint64_t>(in, path);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (static_cast<std::uint64_t>(in.gcount()) != header_len) {
    throw CorruptCheckpointError(path.string() + ": truncated header");
  }
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptCheckpointError(path.string() + ": bad header: " + e.what());
  }

  Checkpoint ck;
  ck.modality = modality_from_string(header.at("modality").get<std::string>());
  ck.digest = header.at("digest").get<std::string>();
  ck.meta = header.value("meta", json::object());
  Rng rng(0);
  ck.model = ModalityClassifier(model_config_from_json(header.at("config")), rng);

  std::vector<NamedTensor> stored;
  for (const auto& t : header.at("tensors")) {
    const Shape shape{t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>()};
    std::vector<double> values(shape.rows * shape.cols);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != values.size() * sizeof(double)) {
      throw CorruptCheckpointError(path.string() + ": truncated tensor data");
    }
    stored.push_back({t.at("name").get<std::string>(), Tensor(shape, std::move(values))});
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CorruptCheckpointError(path.string() + ": trailing bytes after tensor data");
  }
  const std::string actual = state_digest(stored);
  if (actual != ck.digest) {
    throw CorruptCheckpointError(path.string() + ": digest mismatch (stored " + ck.digest +
                                 ", computed " + actual + ")");
  }
  ck.model.load_state(stored);
  ck.model.set_mode(Mode::eval);
  return ck;
}

}  // namespace dcat
