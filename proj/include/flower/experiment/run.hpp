// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flower/experiment/config.hpp"
#include "flower/flow/flow_stack.hpp"
#include "flower/guidance/joint.hpp"
#include "flower/paths/field_network.hpp"

namespace flower::experiment {

/// Version plus git revision of the library build.
std::string build_id();

/// Relative directories are placed under $FLOWER_OUTPUT_ROOT when it is set.
std::string resolve_output_dir(const std::string& dir);

struct LossRow {
  std::size_t step = 0;
  double l_unet = 0.0;
  double l_nf = 0.0;
  double total = 0.0;
};

struct SampleRow {
  std::size_t steps = 0;
  double mse = 0.0;
  double si_sdr = 0.0;
};

struct RunRecord {
  ExperimentConfig config;
  std::string status = "ok";  // "ok" or "failed"
  std::string error;
  std::string build;
  std::vector<LossRow> losses;
  std::vector<SampleRow> samples;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, bool>> probes;
  double wall_time_s = 0.0;

  void set_metric(const std::string& name, double value);
  /// Throws std::out_of_range for an unknown name.
  double metric(const std::string& name) const;
  bool has_metric(const std::string& name) const;
  void set_probe(const std::string& name, bool value);
  bool ok() const { return status == "ok"; }
};

/// Full record: config snapshot, build, status, metrics, probes, wall time.
std::string record_json(const RunRecord& record);
/// The reproducible part of a record (no wall time); byte-identical across
/// runs of the same config, seed and build.
std::string metrics_json(const RunRecord& record);

/// Writes record.json (atomically, via rename), losses.csv and samples.csv
/// into `dir`, creating it if needed.
void write_record(const std::string& dir, const RunRecord& record);

/// How every random stream of a run derives from run.seed.
extern const char* const kSeedPolicy;

/// Field network, optional flow and training state for one toy task.
class ToyExperiment {
 public:
  explicit ToyExperiment(const ExperimentConfig& config);
  ~ToyExperiment();
  ToyExperiment(ToyExperiment&&) noexcept;
  ToyExperiment& operator=(ToyExperiment&&) noexcept;

  /// Runs train.steps optimizer steps, appending one LossRow per step.
  void train(RunRecord& record);
  /// Samples once per sample.steps entry on a fixed test set and records
  /// restoration metrics; FLOWER tasks also record latent statistics.
  void evaluate(RunRecord& record, const std::string& out_dir) const;

  /// Inference-only switch; training is unaffected.
  void set_resample_per_step(bool resample);

  void save(const std::string& path) const;
  void load(const std::string& path);

  guidance::PathSpec path_spec() const;
  guidance::GuidanceScaling scaling() const;
  const paths::FieldNetwork& field() const;
  /// Null for baseline tasks.
  const flow::FlowStack* flow() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

enum class Phase { kFull, kTrain, kSample };

/// Runs the configured task into `out_dir`. Failures are caught and reported
/// through status/error; a partial record is still written. ConfigError from
/// validation propagates.
RunRecord run(const ExperimentConfig& config, const std::string& out_dir, Phase phase = Phase::kFull,
              const std::string& checkpoint = "");

struct SweepSummaryRow {
  std::string value;
  std::string metric;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t runs = 0;
  std::size_t failed = 0;
};

struct SweepResult {
  std::string param;
  std::vector<RunRecord> runs;
  std::vector<SweepSummaryRow> summary;
};

/// One run per (value, seed) under out_dir/<param>=<value>/seed-<seed>.
/// Individual failures are recorded and the sweep continues. Writes
/// sweep.csv with the per-value mean and standard error of every metric.
SweepResult sweep(const ExperimentConfig& base, const std::string& param, const std::vector<std::string>& values,
                  const std::vector<std::uint64_t>& seeds, const std::string& out_dir);

}  // namespace flower::experiment
