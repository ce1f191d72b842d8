#include "dcat/experiment.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dcat/checkpoint.hpp"
#include "dcat/dataset_io.hpp"
#include "dcat/digest.hpp"
#include "dcat/factorization.hpp"
#include "dcat/verification.hpp"

#ifndef DCAT_VERSION
#define DCAT_VERSION "unknown"
#endif

extern char** environ;

namespace dcat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSplits[] = {"train", "val", "test"};
constexpr std::size_t kHeldOutBatch = 32;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

json metrics_to_json(const MetricsReport& m) {
  json per_class = json::array();
  for (const auto& c : m.per_class) {
    per_class.push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
  }
  return {{"accuracy", m.accuracy},
          {"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"macro_f1", m.macro_f1},
          {"per_class", per_class}};
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport m;
  m.accuracy = j.at("accuracy").get<double>();
  m.macro_precision = j.at("macro_precision").get<double>();
  m.macro_recall = j.at("macro_recall").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  for (const auto& c : j.at("per_class")) {
    m.per_class.push_back(
        {c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("f1").get<double>()});
  }
  return m;
}

std::string epoch_line(const EpochRecord& r) {
  return json{{"epoch", r.epoch},
              {"l_ce", r.l_ce},
              {"l_ca", r.l_ca},
              {"lambda", r.lambda},
              {"total", r.total},
              {"masked_in_fraction", r.masked_in_fraction},
              {"val",
               {{"accuracy", r.val.accuracy},
                {"precision", r.val.macro_precision},
                {"recall", r.val.macro_recall},
                {"f1", r.val.macro_f1}}}}
      .dump();
}

std::vector<LossBreakdown> read_steps(const fs::path& path) {
  std::vector<LossBreakdown> steps;
  for (const auto& j : read_jsonl(path)) {
    steps.push_back({j.at("l_ce").get<double>(), j.at("l_ca").get<double>(),
                     j.at("lambda").get<double>(), j.at("total").get<double>(),
                     j.at("masked_in").get<std::size_t>()});
  }
  return steps;
}

struct Residuals {
  double r_a = 0.0;
  double r_b = 0.0;
  double product = 0.0;
};

json to_json(const Residuals& r) {
  return {{"r_a", r.r_a}, {"r_b", r.r_b}, {"product_residual", r.product}};
}

// Mean factorization residuals between source and target attention over a batch.
Residuals alignment_residuals(const ModalityClassifier& source, Modality source_modality,
                              const ModalityClassifier& target, Modality target_modality,
                              std::span<const PairedSample> batch) {
  std::vector<const Signal*> a, b;
  for (const auto& s : batch) {
    a.push_back(&view(s, source_modality));
    b.push_back(&view(s, target_modality));
  }
  NoGradGuard guard;
  const auto out_a = source.infer(a);
  const auto out_b = target.infer(b);
  Residuals r;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto w = verify_factorization(out_a.triples[i].k, out_a.triples[i].v,
                                        out_b.triples[i].k, out_b.triples[i].v);
    r.r_a += w.r_a;
    r.r_b += w.r_b;
    r.product += w.product_residual;
  }
  const double n = static_cast<double>(batch.size());
  r.r_a /= n;
  r.r_b /= n;
  r.product /= n;
  return r;
}

}  // namespace

std::string version_string() { return DCAT_VERSION; }

std::string format_lambda(double lambda) {
  std::ostringstream os;
  os << lambda;
  return os.str();
}

std::span<const PairedSample> SplitWindows::get(const std::string& split) const {
  if (split == "train") return train;
  if (split == "val") return val;
  if (split == "test") return test;
  throw std::invalid_argument("unknown split '" + split + "' (expected train, val or test)");
}

std::size_t resolve_workers(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("DCAT_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError("DCAT_WORKERS must be a positive integer, got '" + std::string(env) + "'");
    }
    return static_cast<std::size_t>(v);
  }
  return 1;
}

Experiment::Experiment(ExperimentConfig cfg, ProgressFn progress)
    : cfg_(std::move(cfg)), root_(cfg_.output_dir), progress_(std::move(progress)) {
  cfg_.validate();
  json hashed = to_json(cfg_);
  hashed.erase("output_dir");
  config_hash_ = json_hash(hashed);
  dataset_hash_ = dataset_hash(cfg_);
  bind_directory();
}

void Experiment::bind_directory() {
  fs::create_directories(root_);
  const fs::path path = root_ / "config.json";
  const json mine = to_json(cfg_);
  if (fs::exists(path)) {
    if (read_json_file(path) != mine) {
      throw ConfigError(root_.string() +
                        " already holds a different configuration; use a fresh output directory");
    }
    return;
  }
  write_json(path, mine);
}

fs::path Experiment::baseline_dir(std::uint64_t seed) const {
  return root_ / "baseline" / ("seed-" + std::to_string(seed));
}

fs::path Experiment::transfer_dir(const RunSpec& run) const {
  return root_ / "transfer" /
         ("lambda-" + format_lambda(run.lambda) + "_seed-" + std::to_string(run.seed) +
          (run.masking ? "_masked" : "_unmasked"));
}

bool Experiment::run_complete(const fs::path& dir) const {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) return false;
  try {
    const json m = read_json_file(path);
    return m.value("complete", false) && m.value("config_hash", "") == config_hash_;
  } catch (const std::exception&) {
    return false;
  }
}

json Experiment::synth() {
  const auto recordings = generate(cfg_.dataset);
  const Splits s = split(recordings, cfg_.split);
  const fs::path dir = data_dir();
  fs::create_directories(dir);
  json files = json::object();
  json subjects = json::object();
  const std::vector<PairedSample>* parts[] = {&s.train, &s.val, &s.test};
  std::vector<std::set<int>> subject_sets;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string name = std::string(kSplits[i]) + ".bin";
    write_split(dir / name, *parts[i], dataset_hash_, cfg_.seed, kSplits[i]);
    files[name] = sha256_file(dir / name);
    const auto header = read_split_header(dir / name);
    subjects[kSplits[i]] = header.subjects;
    subject_sets.emplace_back(header.subjects.begin(), header.subjects.end());
  }
  bool disjoint = true;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j)
      for (int id : subject_sets[i]) disjoint = disjoint && !subject_sets[j].count(id);

  json manifest = {{"command", "synth"},
                   {"version", version_string()},
                   {"seed", cfg_.seed},
                   {"config_hash", config_hash_},
                   {"dataset_hash", dataset_hash_},
                   {"split", to_string(cfg_.split.kind)},
                   {"recordings",
                    {{"train", s.train.size()}, {"val", s.val.size()}, {"test", s.test.size()}}},
                   {"subjects", subjects},
                   {"subjects_disjoint", disjoint},
                   {"files", files},
                   {"complete", true}};
  write_json(dir / "manifest.json", manifest);
  return manifest;
}

SplitWindows Experiment::load_data() const {
  SplitWindows out;
  out.classes = cfg_.dataset.classes;
  std::vector<PairedSample>* parts[] = {&out.train, &out.val, &out.test};
  for (std::size_t i = 0; i < 3; ++i) {
    const fs::path path = data_dir() / (std::string(kSplits[i]) + ".bin");
    if (!fs::exists(path)) {
      throw MissingInputError("missing " + path.string() + "; run synth first");
    }
    const auto recordings = read_split(path, dataset_hash_);
    *parts[i] = window_all(recordings, cfg_.window.length, cfg_.window.stride);
  }
  return out;
}

json Experiment::write_run(const fs::path& dir, const std::string& command,
                           const ModalityClassifier& model, Modality modality, const RunLog& log,
                           std::uint64_t seed, const SplitWindows& data, json extra) {
  fs::create_directories(dir);
  fs::remove(dir / "manifest.json");

  save_checkpoint(dir / "checkpoint.bin", model, modality,
                  {{"seed", seed}, {"dataset_hash", dataset_hash_}});

  std::string epochs, steps;
  json timing = json::array();
  for (const auto& r : log.epochs) {
    epochs += epoch_line(r) + "\n";
    timing.push_back({{"epoch", r.epoch}, {"seconds", r.seconds}});
  }
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& s = log.steps[i];
    steps += json{{"step", i + 1},
                  {"l_ce", s.l_ce},
                  {"l_ca", s.l_ca},
                  {"lambda", s.lambda},
                  {"total", s.total},
                  {"masked_in", s.masked_in_count}}
                 .dump() +
             "\n";
  }
  write_text(dir / "epochs.jsonl", epochs);
  write_text(dir / "steps.jsonl", steps);
  write_json(dir / "timing.json", {{"epochs", timing}});

  json metrics = metrics_to_json(dcat::evaluate(model, modality, data.test, data.classes));
  metrics["split"] = "test";
  metrics["modality"] = to_string(modality);
  metrics["best_epoch"] = log.best_epoch;
  write_json(dir / "metrics.json", metrics);

  json files = json::object();
  for (const char* name : {"checkpoint.bin", "epochs.jsonl", "steps.jsonl", "metrics.json"}) {
    files[name] = sha256_file(dir / name);
  }
  json manifest = {{"command", command},
                   {"version", version_string()},
                   {"seed", seed},
                   {"config_hash", config_hash_},
                   {"dataset_hash", dataset_hash_},
                   {"modality", to_string(modality)},
                   {"files", files}};
  manifest.update(extra);
  manifest["complete"] = true;
  write_json(dir / "manifest.json", manifest);
  return manifest;
}

TrainConfig Experiment::target_config(const RunSpec& run) const {
  TrainConfig t = cfg_.target;
  t.seed = run.seed;
  t.lambda = run.lambda;
  t.masking_enabled = run.masking;
  return t;
}

json Experiment::pretrain() {
  const SplitWindows data = load_data();
  const TrainingData td{data.train, data.val, data.classes};
  auto cb = [&](const EpochRecord& r) {
    if (progress_) progress_("source", r);
  };
  PretrainResult res = pretrain_source(cfg_.source, cfg_.encoder, cfg_.transfer.source, td, cb);
  return write_run(source_dir(), "pretrain", res.source.model, res.source.modality, res.log,
                   cfg_.source.seed, data, {{"digest", res.source.digest}});
}

json Experiment::baseline(std::uint64_t seed) {
  const SplitWindows data = load_data();
  const TrainingData td{data.train, data.val, data.classes};
  RunSpec run{0.0, seed, cfg_.transfer.masking_enabled};
  const std::string label = "baseline seed " + std::to_string(seed);
  auto cb = [&](const EpochRecord& r) {
    if (progress_) progress_(label, r);
  };
  TrainedModel t = train_target(target_config(run), cfg_.encoder, nullptr, cfg_.transfer.target(), td, cb);
  return write_run(baseline_dir(seed), "baseline", t.model, t.modality, t.log, seed, data,
                   {{"direction", cfg_.transfer.direction()}});
}

json Experiment::transfer(const RunSpec& run) {
  const fs::path ckpt = source_dir() / "checkpoint.bin";
  if (!fs::exists(ckpt)) {
    throw MissingInputError("no source checkpoint at " + ckpt.string() + "; run pretrain first");
  }
  const SplitWindows data = load_data();
  const TrainingData td{data.train, data.val, data.classes};
  Checkpoint ck = load_checkpoint(ckpt);
  if (ck.modality != cfg_.transfer.source) {
    throw ConfigError("source checkpoint was trained on modality " + to_string(ck.modality) +
                      " but the configured direction is " + cfg_.transfer.direction());
  }
  FrozenSourceModel source = FrozenSourceModel::freeze(std::move(ck.model), ck.modality);
  const std::string before = source.digest;
  const std::string label = "transfer lambda " + format_lambda(run.lambda) + " seed " +
                            std::to_string(run.seed) + (run.masking ? "" : " unmasked");
  auto cb = [&](const EpochRecord& r) {
    if (progress_) progress_(label, r);
  };
  TrainedModel t = train_target(target_config(run), cfg_.encoder, &source, cfg_.transfer.target(), td, cb);
  const std::string after = source.current_digest();
  if (after != before) {
    throw std::runtime_error("source parameters changed during target training (digest " + before +
                             " -> " + after + ")");
  }
  return write_run(transfer_dir(run), "transfer", t.model, t.modality, t.log, run.seed, data,
                   {{"lambda", run.lambda},
                    {"masking", run.masking},
                    {"direction", cfg_.transfer.direction()},
                    {"source_digest_before", before},
                    {"source_digest_after", after}});
}

AblationTable Experiment::ablate(const AblateOptions& options) {
  if (!fs::exists(source_dir() / "checkpoint.bin")) {
    throw MissingInputError("no source checkpoint in " + source_dir().string() +
                            "; run pretrain first");
  }
  (void)load_data();

  std::vector<RunSpec> cells;
  for (double l : cfg_.transfer.lambda_grid)
    for (auto seed : cfg_.transfer.seeds) cells.push_back({l, seed, cfg_.transfer.masking_enabled});

  std::vector<RunSpec> pending;
  for (const auto& c : cells)
    if (!run_complete(transfer_dir(c))) pending.push_back(c);

  std::vector<std::string> failures;
  auto describe = [](const RunSpec& c) {
    return "(lambda=" + format_lambda(c.lambda) + ", seed=" + std::to_string(c.seed) + ")";
  };

  if (options.workers <= 1 || options.executable.empty()) {
    for (const auto& c : pending) {
      try {
        transfer(c);
      } catch (const std::exception& e) {
        failures.push_back(describe(c) + ": " + e.what());
      }
    }
  } else {
    std::map<pid_t, RunSpec> running;
    std::size_t next = 0;
    auto reap_one = [&] {
      int status = 0;
      const pid_t pid = ::waitpid(-1, &status, 0);
      if (pid <= 0) throw std::runtime_error("waitpid failed");
      const auto it = running.find(pid);
      if (it == running.end()) return;
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        failures.push_back(describe(it->second) + ": worker exited with status " +
                           std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
      }
      running.erase(it);
    };
    const std::string config_path = (root_ / "config.json").string();
    while (next < pending.size() || !running.empty()) {
      if (next < pending.size() && running.size() < options.workers) {
        const RunSpec& c = pending[next++];
        std::vector<std::string> args = {options.executable.string(),
                                          "transfer",
                                          "--config",
                                          config_path,
                                          "--out",
                                          root_.string(),
                                          "--lambda",
                                          format_lambda(c.lambda),
                                          "--seed",
                                          std::to_string(c.seed),
                                          "--quiet"};
        if (!c.masking) args.emplace_back("--no-masking");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        pid_t pid = 0;
        if (::posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), environ) != 0) {
          failures.push_back(describe(c) + ": could not start worker " + args[0]);
          continue;
        }
        running.emplace(pid, c);
      } else {
        reap_one();
      }
    }
  }

  fs::create_directories(ablation_dir());
  if (!failures.empty()) {
    write_json(ablation_dir() / "failures.json", failures);
    std::string msg = "ablation: " + std::to_string(failures.size()) + " cell(s) failed:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw std::runtime_error(msg);
  }
  fs::remove(ablation_dir() / "failures.json");

  std::vector<AblationCell> results;
  for (const auto& c : cells) {
    const json m = read_json_file(transfer_dir(c) / "metrics.json");
    results.push_back({c.lambda, cfg_.transfer.direction(), c.seed, metrics_from_json(m)});
  }
  AblationTable table = build_ablation(results, cfg_.transfer.lambda_grid,
                                       {cfg_.transfer.direction()}, cfg_.transfer.seeds);
  std::ostringstream tsv;
  write_tsv(tsv, table);
  write_text(ablation_dir() / "table.tsv", tsv.str());
  json rows = json::array();
  for (const auto& r : table.rows) {
    auto ms = [](const MeanSpread& m) { return json{{"mean", m.mean}, {"std", m.spread}}; };
    rows.push_back({{"lambda", r.lambda},
                    {"direction", r.direction},
                    {"seeds", r.seeds},
                    {"accuracy", ms(r.accuracy)},
                    {"recall", ms(r.recall)},
                    {"precision", ms(r.precision)},
                    {"f1", ms(r.f1)}});
  }
  write_json(ablation_dir() / "summary.json", {{"rows", rows}});
  write_json(ablation_dir() / "manifest.json",
             {{"command", "ablate"},
              {"version", version_string()},
              {"seed", cfg_.seed},
              {"config_hash", config_hash_},
              {"dataset_hash", dataset_hash_},
              {"cells", cells.size()},
              {"files",
               {{"table.tsv", sha256_file(ablation_dir() / "table.tsv")},
                {"summary.json", sha256_file(ablation_dir() / "summary.json")}}},
              {"complete", true}});
  return table;
}

json Experiment::evaluate(const fs::path& checkpoint, const std::string& split) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const SplitWindows data = load_data();
  json out = metrics_to_json(dcat::evaluate(ck.model, ck.modality, data.get(split), data.classes));
  out["split"] = split;
  out["modality"] = to_string(ck.modality);
  out["checkpoint_digest"] = ck.digest;
  write_json(checkpoint.parent_path() / ("eval-" + split + ".json"), out);
  return out;
}

json Experiment::verify() {
  std::vector<CheckResult> checks = gradient_checks(cfg_.seed);
  for (auto& c : loss_invariant_checks(cfg_.seed)) checks.push_back(std::move(c));
  for (auto& c : factorization_recovery_checks(cfg_.seed)) checks.push_back(std::move(c));

  const std::uint64_t seed = cfg_.transfer.seeds.front();
  const RunSpec run{cfg_.transfer.lambda, seed, cfg_.transfer.masking_enabled};
  const fs::path paths[] = {source_dir(), baseline_dir(seed), transfer_dir(run)};
  const char* names[] = {"source", "baseline", "target"};
  std::vector<std::optional<Checkpoint>> loaded(3);
  for (std::size_t i = 0; i < 3; ++i) {
    const fs::path ckpt = paths[i] / "checkpoint.bin";
    if (!fs::exists(ckpt)) {
      throw MissingInputError("missing " + ckpt.string() + "; run pretrain, baseline and transfer first");
    }
    try {
      loaded[i] = load_checkpoint(ckpt);
      checks.push_back({std::string("checkpoint.") + names[i], true, 0.0, 0.0, "digest " + loaded[i]->digest});
    } catch (const std::exception& e) {
      checks.push_back({std::string("checkpoint.") + names[i], false, 1.0, 0.0, e.what()});
    }
  }

  json residuals = json::object();
  if (loaded[0] && loaded[2]) {
    const json target_manifest = read_json_file(transfer_dir(run) / "manifest.json");
    const bool frozen = target_manifest.value("source_digest_before", "") == loaded[0]->digest &&
                        target_manifest.value("source_digest_after", "") == loaded[0]->digest;
    checks.push_back({"source.frozen", frozen, frozen ? 0.0 : 1.0, 0.0,
                      "source digest unchanged across target training"});
    checks.push_back(loss_bookkeeping_check(read_steps(transfer_dir(run) / "steps.jsonl")));

    const SplitWindows data = load_data();
    const auto held_out = data.test.size() > kHeldOutBatch
                              ? std::span<const PairedSample>(data.test).first(kHeldOutBatch)
                              : std::span<const PairedSample>(data.test);
    Rng init(seed);
    const std::size_t channels = view(held_out.front(), cfg_.transfer.target()).channels;
    ModalityClassifier control(
        make_model_config(cfg_.encoder, channels, target_config(run), data.classes), init);
    control.set_mode(Mode::eval);

    const Modality sm = loaded[0]->modality;
    const Modality tm = cfg_.transfer.target();
    const Residuals rc = alignment_residuals(loaded[0]->model, sm, control, tm, held_out);
    const Residuals rt = alignment_residuals(loaded[0]->model, sm, loaded[2]->model, tm, held_out);
    residuals["control"] = to_json(rc);
    residuals["target"] = to_json(rt);
    if (loaded[1]) {
      residuals["baseline"] = to_json(alignment_residuals(loaded[0]->model, sm, loaded[1]->model, tm, held_out));
    }
    residuals["batch"] = held_out.size();
    checks.push_back({"alignment.r_a", rt.r_a <= 0.5 * rc.r_a, rt.r_a / rc.r_a, 0.5,
                      "target r_A relative to the untrained control"});
    checks.push_back({"alignment.r_b", rt.r_b <= 0.5 * rc.r_b, rt.r_b / rc.r_b, 0.5,
                      "target r_B relative to the untrained control"});

    const auto epochs = read_jsonl(transfer_dir(run) / "epochs.jsonl");
    const double first = epochs.front().at("l_ca").get<double>();
    const double last = epochs.back().at("l_ca").get<double>();
    checks.push_back({"alignment.loss_drop", last <= 0.5 * first, last / first, 0.5,
                      "final-epoch mean L_CA relative to epoch 1"});
  }

  json list = json::array();
  for (const auto& c : checks) list.push_back(to_json(c));
  const bool passed = all_passed(checks);
  json report = {{"version", version_string()},
                 {"config_hash", config_hash_},
                 {"dataset_hash", dataset_hash_},
                 {"checks", list},
                 {"residuals", residuals},
                 {"passed", passed}};
  fs::create_directories(verify_dir());
  write_json(verify_dir() / "report.json", report);
  return report;
}

}  // namespace dcat
