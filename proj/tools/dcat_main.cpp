#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "dcat/checkpoint.hpp"
#include "dcat/config.hpp"
#include "dcat/dataset_io.hpp"
#include "dcat/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode {
  kOk = 0,
  kFailure = 1,
  kBadConfig = 2,
  kMissingInput = 3,
  kCorrupt = 4,
  kVerifyFailed = 5,
};

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  bool quiet = false;
};

dcat::ExperimentConfig resolve_config(const Common& c) {
  json j = dcat::to_json(c.config.empty() ? dcat::ExperimentConfig{}
                                          : dcat::load_experiment(c.config));
  for (const auto& o : c.overrides) dcat::apply_override(j, o);
  if (!c.out.empty()) j["output_dir"] = c.out;
  return dcat::experiment_from_json(j);
}

dcat::Experiment open(const Common& c) {
  dcat::ProgressFn progress;
  if (!c.quiet) {
    progress = [](const std::string& label, const dcat::EpochRecord& r) {
      std::fprintf(stderr, "[%s] epoch %zu  l_ce %.4f  l_ca %.4f  total %.4f  val_f1 %.4f  (%.1fs)\n",
                   label.c_str(), r.epoch, r.l_ce, r.l_ca, r.total, r.val.macro_f1, r.seconds);
    };
  }
  return dcat::Experiment(resolve_config(c), progress);
}

void emit_error(const std::string& command, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"command", command}, {"message", message}}.dump() << "\n";
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config, "Experiment config file (JSON)")->check(CLI::ExistingFile);
  sub->add_option("-s,--set", c.overrides, "Override a config value: key.path=value")
      ->take_all();
  sub->add_option("-o,--out", c.out, "Output directory (overrides output_dir)");
  sub->add_flag("-q,--quiet", c.quiet, "No per-epoch progress on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoupled cross-attention transfer on synthetic paired-modality data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dcat::version_string());

  Common common;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  bool no_masking = false;
  std::size_t workers = 0;
  std::string checkpoint;
  std::string split = "test";

  auto* synth = app.add_subcommand("synth", "Generate and split the synthetic dataset");
  auto* pretrain = app.add_subcommand("pretrain", "Train and freeze the source classifier");
  auto* baseline = app.add_subcommand("baseline", "Train the target classifier alone");
  auto* transfer = app.add_subcommand("transfer", "Train the target against the frozen source");
  auto* ablate = app.add_subcommand("ablate", "Run the lambda x seed grid and aggregate");
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on one split");
  auto* verify = app.add_subcommand("verify", "Run the verification suite");
  for (auto* sub : {synth, pretrain, baseline, transfer, ablate, evaluate, verify}) add_common(sub, common);

  for (auto* sub : {baseline, transfer}) {
    sub->add_option("--seed", seed, "Target seed (default: first of transfer.seeds)");
  }
  transfer->add_option("--lambda", lambda, "Transfer weight (default: transfer.lambda)")
      ->check(CLI::NonNegativeNumber);
  transfer->add_flag("--no-masking", no_masking, "Align on every sample, not only correct ones");
  ablate->add_option("-j,--workers", workers, "Parallel worker processes (default: DCAT_WORKERS or 1)");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--split", split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}));

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    dcat::Experiment exp = open(common);
    const auto& cfg = exp.config();
    const std::uint64_t run_seed = seed.value_or(cfg.transfer.seeds.front());
    json result;
    int code = kOk;
    if (command == "synth") {
      result = exp.synth();
    } else if (command == "pretrain") {
      result = exp.pretrain();
    } else if (command == "baseline") {
      result = exp.baseline(run_seed);
    } else if (command == "transfer") {
      const dcat::RunSpec run{lambda.value_or(cfg.transfer.lambda), run_seed,
                              cfg.transfer.masking_enabled && !no_masking};
      result = exp.transfer(run);
    } else if (command == "ablate") {
      dcat::AblateOptions opts;
      opts.workers = dcat::resolve_workers(workers);
      opts.executable = fs::canonical("/proc/self/exe");
      exp.ablate(opts);
      result = dcat::read_json_file(exp.ablation_dir() / "summary.json");
    } else if (command == "evaluate") {
      result = exp.evaluate(checkpoint, split);
    } else if (command == "verify") {
      result = exp.verify();
      if (!result.at("passed").get<bool>()) {
        code = kVerifyFailed;
        for (const auto& c : result.at("checks")) {
          if (!c.at("passed").get<bool>()) {
            emit_error(command, "check_failed",
                       c.at("name").get<std::string>() + ": " + c.at("detail").get<std::string>());
          }
        }
      }
    }
    if (!common.quiet || command == "verify" || command == "evaluate") std::cout << result.dump(2) << "\n";
    return code;
  } catch (const dcat::ConfigError& e) {
    emit_error(command, "config", e.what());
    return kBadConfig;
  } catch (const dcat::MissingInputError& e) {
    emit_error(command, "missing_input", e.what());
    return kMissingInput;
  } catch (const dcat::StaleDataError& e) {
    emit_error(command, "stale_data", e.what());
    return kMissingInput;
  } catch (const dcat::CorruptCheckpointError& e) {
    emit_error(command, "corrupt_checkpoint", e.what());
    return kCorrupt;
  } catch (const std::exception& e) {
    emit_error(command, "runtime", e.what());
    return kFailure;
  }
}
