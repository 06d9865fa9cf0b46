// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

// Batch driver: distort, train, sample, evaluate, toy, sweep, run.
// Exit codes: 0 ok, 1 run failure, 2 configuration or usage error.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "flower/autodiff/allocator.hpp"
#include "flower/experiment/config.hpp"
#include "flower/experiment/run.hpp"

namespace fs = std::filesystem;
using namespace flower::experiment;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "INI or JSON experiment config");
  cmd->add_option("--seed", c.seed, "run seed (overrides run.seed)");
  cmd->add_option("--out", c.out, "output directory (overrides run.output_dir)");
  cmd->add_option("--set", c.overrides, "override a config key, section.key=value (repeatable)");
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ExperimentConfig build_config(const Common& c, const CLI::App* cmd) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    set_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (cmd->count("--seed") > 0) cfg.seed = c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

int report(const RunRecord& rec, const std::string& dir) {
  std::printf("status %s\nout %s\n", rec.status.c_str(), dir.c_str());
  for (const auto& [name, value] : rec.metrics) std::printf("%s %.17g\n", name.c_str(), value);
  for (const auto& [name, value] : rec.probes) std::printf("probe %s %s\n", name.c_str(), value ? "true" : "false");
  if (!rec.ok()) {
    std::fprintf(stderr, "run failed: %s\n", rec.error.c_str());
    return kExitRunFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  flower::ad::configure_allocator();
  CLI::App app{"flower: guided generative restoration experiments"};
  app.require_subcommand(1);

  Common common;
  auto* toy = app.add_subcommand("toy", "train and sample a toy restoration task");
  auto* train = app.add_subcommand("train", "train a toy task and save a checkpoint");
  auto* sample = app.add_subcommand("sample", "sample a toy task from a checkpoint");
  auto* run_cmd = app.add_subcommand("run", "run whatever task the config names");
  auto* distort = app.add_subcommand("distort", "degrade a folder of WAV files");
  auto* evaluate = app.add_subcommand("evaluate", "LSD and SI-SDR between two WAV folders");
  auto* sweep_cmd = app.add_subcommand("sweep", "repeat a run over parameter values and seeds");
  for (auto* cmd : {toy, train, sample, run_cmd, distort, evaluate, sweep_cmd}) add_common(cmd, common);

  std::string checkpoint;
  train->add_option("--checkpoint", checkpoint, "checkpoint path (default <out>/checkpoint.bin)");
  sample->add_option("--checkpoint", checkpoint, "checkpoint path (default <out>/checkpoint.bin)");

  std::string in_dir, noise_dir, manifest;
  distort->add_option("--in", in_dir, "clean WAV folder");
  distort->add_option("--noise", noise_dir, "noise WAV folder (white noise when omitted)");
  distort->add_option("--manifest", manifest, "replay an existing manifest instead of sampling");

  std::string ref_dir, est_dir;
  evaluate->add_option("--ref", ref_dir, "reference WAV folder");
  evaluate->add_option("--est", est_dir, "estimate WAV folder");

  std::string param, values, seeds;
  sweep_cmd->add_option("--param", param, "numeric config key, e.g. sample.steps")->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")->required();
  sweep_cmd->add_option("--seeds", seeds, "comma-separated seeds (default: the run seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    ExperimentConfig cfg = build_config(common, cmd);
    std::string report_file;
    if (cmd == distort) {
      cfg.task = Task::kDistort;
      if (!in_dir.empty()) cfg.distort_input = in_dir;
      if (!noise_dir.empty()) cfg.distort_noise = noise_dir;
      if (!manifest.empty()) cfg.distort_manifest = manifest;
    } else if (cmd == evaluate) {
      cfg.task = Task::kEvaluate;
      if (!ref_dir.empty()) cfg.evaluate_ref = ref_dir;
      if (!est_dir.empty()) cfg.evaluate_est = est_dir;
      if (fs::path(cfg.output_dir).extension() == ".csv") {
        report_file = cfg.output_dir;
        const auto parent = fs::path(cfg.output_dir).parent_path();
        cfg.output_dir = parent.empty() ? "." : parent.string();
      }
    } else if (cmd == toy || cmd == train || cmd == sample) {
      if (!is_toy_task(cfg.task)) {
        throw ConfigError("subcommand '" + cmd->get_name() + "' needs a toy task, config names '" +
                          to_string(cfg.task) + "'");
      }
    }
    cfg.validate();
    const std::string dir = resolve_output_dir(cfg.output_dir);

    if (cmd == sweep_cmd) {
      std::vector<std::uint64_t> seed_list;
      for (const auto& s : split(seeds)) {
        try {
          seed_list.push_back(std::stoull(s));
        } catch (const std::exception&) {
          throw ConfigError("bad seed '" + s + "'");
        }
      }
      const auto result = sweep(cfg, param, split(values), seed_list, dir);
      std::size_t failed = 0;
      for (const auto& r : result.runs) failed += r.ok() ? 0 : 1;
      for (const auto& row : result.summary) {
        std::printf("%s=%s %s mean %.17g se %.17g n %zu\n", param.c_str(), row.value.c_str(), row.metric.c_str(),
                    row.mean, row.std_error, row.runs);
      }
      std::printf("runs %zu failed %zu out %s\n", result.runs.size(), failed, dir.c_str());
      return failed == 0 ? kExitOk : kExitRunFailure;
    }

    Phase phase = Phase::kFull;
    if (cmd == train) phase = Phase::kTrain;
    if (cmd == sample) phase = Phase::kSample;
    const RunRecord rec = run(cfg, dir, phase, checkpoint);
    if (!report_file.empty() && rec.ok()) {
      const auto produced = fs::path(dir) / "report.csv";
      if (fs::absolute(produced) != fs::absolute(report_file)) {
        fs::copy_file(produced, report_file, fs::copy_options::overwrite_existing);
      }
    }
    return report(rec, dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRunFailure;
  }
}
