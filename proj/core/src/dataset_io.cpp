#include "dcat/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace dcat {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "DCATDATA";

template <class T>
void write_array(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
std::vector<T> read_array(std::istream& in, std::size_t n, const std::filesystem::path& path) {
  std::vector<T> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(T)) {
    throw std::runtime_error(path.string() + ": truncated data file");
  }
  return v;
}

DatasetHeader parse_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0) {
    throw std::runtime_error(path.string() + ": not a dataset file");
  }
  try {
    return DatasetHeader::from_json(json::parse(line.substr(sizeof(kMagic))));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": bad header: " + e.what());
  }
}

}  // namespace

json DatasetHeader::to_json() const {
  return {{"schema_version", schema_version}, {"config_hash", config_hash}, {"seed", seed},
          {"split", split},                   {"count", count},             {"length", length},
          {"channels_a", channels_a},         {"channels_b", channels_b},   {"subjects", subjects}};
}

DatasetHeader DatasetHeader::from_json(const json& j) {
  DatasetHeader h;
  h.schema_version = j.at("schema_version").get<int>();
  h.config_hash = j.at("config_hash").get<std::string>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.split = j.at("split").get<std::string>();
  h.count = j.at("count").get<std::size_t>();
  h.length = j.at("length").get<std::size_t>();
  h.channels_a = j.at("channels_a").get<std::size_t>();
  h.channels_b = j.at("channels_b").get<std::size_t>();
  h.subjects = j.at("subjects").get<std::vector<int>>();
  return h;
}

void write_split(const std::filesystem::path& path, std::span<const PairedSample> samples,
                 const std::string& config_hash, std::uint64_t seed, const std::string& split) {
  DatasetHeader h;
  h.config_hash = config_hash;
  h.seed = seed;
  h.split = split;
  h.count = samples.size();
  if (!samples.empty()) {
    h.length = samples.front().raw_a.length;
    h.channels_a = samples.front().raw_a.channels;
    h.channels_b = samples.front().raw_b.channels;
  }
  std::set<int> subjects;
  std::vector<std::uint64_t> ids, parents;
  std::vector<std::int32_t> labels, subj;
  std::vector<double> a, b;
  for (const auto& s : samples) {
    if (s.raw_a.length != h.length || s.raw_b.length != h.length ||
        s.raw_a.channels != h.channels_a || s.raw_b.channels != h.channels_b) {
      throw std::invalid_argument("write_split: samples have inconsistent shapes");
    }
    subjects.insert(s.subject_id);
    ids.push_back(s.sample_id);
    parents.push_back(s.parent_id);
    labels.push_back(s.label);
    subj.push_back(s.subject_id);
    a.insert(a.end(), s.raw_a.values.begin(), s.raw_a.values.end());
    b.insert(b.end(), s.raw_b.values.begin(), s.raw_b.values.end());
  }
  h.subjects.assign(subjects.begin(), subjects.end());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kMagic << ' ' << h.to_json().dump() << '\n';
  write_array(out, ids);
  write_array(out, parents);
  write_array(out, labels);
  write_array(out, subj);
  write_array(out, a);
  write_array(out, b);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DatasetHeader read_split_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_header(in, path);
}

std::vector<PairedSample> read_split(const std::filesystem::path& path,
                                     const std::string& expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const DatasetHeader h = parse_header(in, path);
  if (h.schema_version != kDatasetSchemaVersion) {
    throw std::runtime_error(path.string() + ": unsupported schema version " +
                             std::to_string(h.schema_version));
  }
  if (h.config_hash != expected_hash) {
    throw StaleDataError(path.string() + ": dataset hash " + h.config_hash +
                         " does not match the configuration (" + expected_hash +
                         "); regenerate with synth");
  }
  const std::size_t n = h.count;
  const auto ids = read_array<std::uint64_t>(in, n, path);
  const auto parents = read_array<std::uint64_t>(in, n, path);
  const auto labels = read_array<std::int32_t>(in, n, path);
  const auto subj = read_array<std::int32_t>(in, n, path);
  const std::size_t sa = h.length * h.channels_a;
  const std::size_t sb = h.length * h.channels_b;
  const auto a = read_array<double>(in, n * sa, path);
  const auto b = read_array<double>(in, n * sb, path);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error(path.string() + ": trailing bytes after data");
  }
  std::vector<PairedSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = out[i];
    s.sample_id = ids[i];
    s.parent_id = parents[i];
    s.label = labels[i];
    s.subject_id = subj[i];
    s.raw_a = Signal(h.length, h.channels_a);
    s.raw_b = Signal(h.length, h.channels_b);
    std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(i * sa), sa, s.raw_a.values.begin());
    std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(i * sb), sb, s.raw_b.values.begin());
  }
  return out;
}

}  // namespace dcat
