// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flower/dsp/distortion.hpp"
#include "flower/dsp/wav.hpp"
#include "flower/paths/score_sde.hpp"
#include "flower/paths/toy_task.hpp"

namespace flower::experiment {

enum class Task {
  kToyFm,
  kToyScore,
  kToyFlowerFm,
  kToyFlowerScore,
  kToyFlowerFmTimeAdaptive,
  kDistort,
  kEvaluate,
  kEulerCheck,
};

Task parse_task(const std::string& name);
std::string to_string(Task task);
bool is_toy_task(Task task);
bool uses_guidance(Task task);
bool uses_score(Task task);

/// Malformed or invalid configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // [run]
  Task task = Task::kToyFm;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";

  // [train]
  std::size_t train_steps = 2000;
  std::size_t batch = 256;
  double lr = 1e-3;
  bool lr_decay = false;

  // [sample]
  std::vector<std::size_t> sampler_steps{15, 25};
  std::size_t test_rows = 2000;
  bool trajectory = false;

  // [toy]
  paths::ToyTaskConfig toy{};

  // [field]
  std::size_t field_width = 64;
  std::size_t field_layers = 4;

  // [flow]
  std::size_t flow_blocks = 4;
  std::size_t flow_width = 32;
  std::size_t flow_layers = 2;
  std::size_t flow_bins = 8;
  double flow_bound = 3.0;

  // [path]
  double sigma_lo = 0.01;
  double sigma_hi = 10.0;
  double sigma_min = 1e-4;
  double t_eps = 1e-5;
  paths::ScoreWeighting weighting = paths::ScoreWeighting::kSigmaSquared;

  // [guidance]
  bool detach_latent = false;
  bool resample_per_step = false;
  bool dump_guidance = false;

  // [distort]
  std::string distort_input;
  std::string distort_noise;
  std::string distort_manifest;
  dsp::FilterFamily family = dsp::FilterFamily::kButterworth;
  std::size_t filter_order = 8;
  double ripple_db = 0.5;
  double rir_length_s = 1.0;
  dsp::DistortionRanges ranges{};
  dsp::WavFormat wav_format = dsp::WavFormat::kFloat32;

  // [evaluate]
  std::string evaluate_ref;
  std::string evaluate_est;

  /// Throws ConfigError naming the first offending key.
  void validate() const;
};

/// Sets "section.key" from its text form. Throws ConfigError for unknown keys
/// or unparsable values.
void set_value(ExperimentConfig& config, const std::string& key, const std::string& value);
std::string get_value(const ExperimentConfig& config, const std::string& key);
/// True for keys whose values are numbers (or lists of numbers).
bool is_numeric_key(const std::string& key);
std::vector<std::string> config_keys();

/// Flat key = value lines grouped under [section] headers; '#' and ';'
/// start comments.
ExperimentConfig parse_ini(const std::string& text);
/// The same schema as nested JSON objects: {"section": {"key": value}}.
ExperimentConfig parse_json(const std::string& text);
/// JSON when the path ends in .json, INI otherwise.
ExperimentConfig load_config(const std::string& path);

std::string to_ini(const ExperimentConfig& config);
std::string to_json(const ExperimentConfig& config);

}  // namespace flower::experiment
