// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/experiment/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <stdexcept>

#include "flower/autodiff/adam.hpp"
#include "flower/autodiff/checkpoint.hpp"
#include "flower/autodiff/ops.hpp"
#include "flower/dsp/distortion.hpp"
#include "flower/dsp/wav.hpp"
#include "flower/flow/mutual_information.hpp"
#include "flower/metrics/metrics.hpp"
#include "flower/paths/ot_path.hpp"
#include "flower/paths/sampler.hpp"
#include "flower/paths/score_sde.hpp"
#include "flower/paths/toy_task.hpp"

#ifndef FLOWER_BUILD_ID
#define FLOWER_BUILD_ID "unknown"
#endif

namespace fs = std::filesystem;

namespace flower::experiment {

namespace {

enum Stream : std::uint64_t { kInit = 1, kData, kLoss, kTest, kSampler, kGuidance, kLatent };

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t id) { return stream(seed, id)(); }

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::ordered_json reproducible_part(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["status"] = r.status;
  if (!r.error.empty()) j["error"] = r.error;
  j["task"] = to_string(r.config.task);
  j["seed"] = r.config.seed;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metrics) j["metrics"][k] = v;
  j["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : r.samples) j["samples"].push_back({{"steps", s.steps}, {"mse", s.mse}, {"si_sdr", s.si_sdr}});
  j["probes"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.probes) j["probes"][k] = v;
  return j;
}

std::vector<fs::path> list_wavs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void run_distort(const ExperimentConfig& cfg, const fs::path& out_dir, RunRecord& rec) {
  std::vector<dsp::ManifestRecord> jobs;
  if (!cfg.distort_manifest.empty()) {
    jobs = dsp::read_manifest(cfg.distort_manifest);
  } else {
    const auto inputs = list_wavs(cfg.distort_input);
    if (inputs.empty()) throw std::runtime_error("no .wav files in " + cfg.distort_input);
    const auto noises = cfg.distort_noise.empty() ? std::vector<fs::path>{} : list_wavs(cfg.distort_noise);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      auto rng = stream(cfg.seed, 1000 + i);
      dsp::ManifestRecord job;
      job.spec = dsp::sample_distortion_spec(rng, cfg.ranges, cfg.family, cfg.filter_order);
      job.spec.ripple_db = cfg.ripple_db;
      job.spec.rir_length_s = cfg.rir_length_s;
      if (!noises.empty()) {
        job.noise = noises[std::uniform_int_distribution<std::size_t>(0, noises.size() - 1)(rng)].string();
      }
      job.input = inputs[i].string();
      job.output = (fs::path("wav") / inputs[i].filename()).string();
      jobs.push_back(std::move(job));
    }
  }
  fs::create_directories(out_dir / "wav");
  std::string manifest;
  double snr = 0.0, rt60 = 0.0, cutoff = 0.0;
  for (const auto& job : jobs) {
    const auto clean = dsp::read_wav(job.input);
    const auto noise = job.noise.empty() ? dsp::AudioBuffer{} : dsp::read_wav(job.noise);
    const auto result = dsp::distort(clean, noise, job.spec);
    const fs::path target = out_dir / job.output;
    fs::create_directories(target.parent_path());
    dsp::write_wav(target.string(), result.y, cfg.wav_format);
    manifest += dsp::to_json_line(job) + "\n";
    snr += job.spec.snr_db;
    rt60 += job.spec.rt60_s;
    cutoff += job.spec.cutoff_hz;
  }
  write_atomic(out_dir / "manifest.jsonl", manifest);
  const double n = static_cast<double>(jobs.size());
  rec.set_metric("files", n);
  rec.set_metric("snr_db_mean", snr / n);
  rec.set_metric("rt60_s_mean", rt60 / n);
  rec.set_metric("cutoff_hz_mean", cutoff / n);
}

void run_evaluate(const ExperimentConfig& cfg, const fs::path& out_dir, RunRecord& rec) {
  const auto report = metrics::evaluate_dirs(cfg.evaluate_ref, cfg.evaluate_est);
  metrics::write_report_csv((out_dir / "report.csv").string(), report);
  rec.set_metric("files", static_cast<double>(report.rows.size()));
  rec.set_metric("lsd", report.mean.lsd);
  rec.set_metric("lsd_h", report.mean.lsd_h);
  rec.set_metric("lsd_l", report.mean.lsd_l);
  rec.set_metric("si_sdr", report.mean.si_sdr);
}

// Euler on dx/dt = x from x(0) = 1; the exact endpoint is e.
void run_euler_check(const ExperimentConfig& cfg, RunRecord& rec) {
  const paths::FieldFn field = [](const ad::Tensor& x, const ad::Tensor&) { return x; };
  double prev = 0.0;
  std::size_t prev_n = 0;
  for (std::size_t n : cfg.sampler_steps) {
    const auto x = paths::euler_integrate(field, ad::Tensor::from({1, 1}, {1.0}), n);
    const double err = std::abs(x.item() - std::exp(1.0));
    rec.set_metric("euler_error_n" + std::to_string(n), err);
    if (prev_n > 0) rec.set_metric("euler_ratio_n" + std::to_string(prev_n) + "_n" + std::to_string(n), prev / err);
    prev = err;
    prev_n = n;
  }
  rec.set_metric("euler_error", prev);
}

}  // namespace

const char* const kSeedPolicy =
    "seed_seq(run.seed, stream): 1 init, 2 data, 3 loss draws, 4 test set, 5 sampler, 6 guidance z, 7 latent "
    "statistics; distortion file i uses stream 1000+i. Baseline and FLOWER tasks share every stream, so paired runs "
    "see identical initial field weights, batches and test sets.";

std::string build_id() { return FLOWER_BUILD_ID; }

std::string resolve_output_dir(const std::string& dir) {
  const char* root = std::getenv("FLOWER_OUTPUT_ROOT");
  const fs::path p(dir);
  if (root == nullptr || *root == '\0' || p.is_absolute()) return dir;
  return (fs::path(root) / p).string();
}

void RunRecord::set_metric(const std::string& name, double value) {
  for (auto& [k, v] : metrics) {
    if (k == name) {
      v = value;
      return;
    }
  }
  metrics.emplace_back(name, value);
}

double RunRecord::metric(const std::string& name) const {
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  throw std::out_of_range("run record has no metric '" + name + "'");
}

bool RunRecord::has_metric(const std::string& name) const {
  return std::any_of(metrics.begin(), metrics.end(), [&](const auto& kv) { return kv.first == name; });
}

void RunRecord::set_probe(const std::string& name, bool value) {
  for (auto& [k, v] : probes) {
    if (k == name) {
      v = value;
      return;
    }
  }
  probes.emplace_back(name, value);
}

std::string metrics_json(const RunRecord& record) { return reproducible_part(record).dump(2); }

std::string record_json(const RunRecord& record) {
  auto j = reproducible_part(record);
  j["build"] = record.build;
  j["seed_policy"] = kSeedPolicy;
  j["loss_steps"] = record.losses.size();
  if (!record.losses.empty()) {
    const auto& last = record.losses.back();
    j["final_losses"] = {{"l_unet", last.l_unet}, {"l_nf", last.l_nf}, {"total", last.total}};
  }
  j["wall_time_s"] = record.wall_time_s;
  j["config"] = nlohmann::ordered_json::parse(to_json(record.config));
  return j.dump(2);
}

void write_record(const std::string& dir, const RunRecord& record) {
  fs::create_directories(dir);
  std::string losses = "step,l_unet,l_nf,total\n";
  for (const auto& r : record.losses) {
    losses += std::to_string(r.step) + "," + fmt17(r.l_unet) + "," + fmt17(r.l_nf) + "," + fmt17(r.total) + "\n";
  }
  std::string samples = "steps,mse,si_sdr\n";
  for (const auto& s : record.samples) samples += std::to_string(s.steps) + "," + fmt17(s.mse) + "," + fmt17(s.si_sdr) + "\n";
  write_atomic(fs::path(dir) / "losses.csv", losses);
  write_atomic(fs::path(dir) / "samples.csv", samples);
  write_atomic(fs::path(dir) / "record.json", record_json(record) + "\n");
}

struct ToyExperiment::State {
  ExperimentConfig config;
  paths::FieldNetwork field;
  std::optional<flow::FlowStack> flow;

  static paths::FieldConfig field_config(const ExperimentConfig& c) {
    paths::FieldConfig fc;
    fc.hidden_width = c.field_width;
    fc.hidden_layers = c.field_layers;
    fc.guidance_dim = uses_guidance(c.task) ? fc.data_dim : 0;
    return fc;
  }

  State(const ExperimentConfig& c, std::mt19937_64&& rng) : config(c), field(field_config(c), rng) {
    if (uses_guidance(c.task)) {
      flow::FlowConfig flc;
      flc.data_dim = field.config().data_dim;
      flc.cond_dim = field.latent_dim();
      flc.blocks = c.flow_blocks;
      flc.hidden_width = c.flow_width;
      flc.hidden_layers = c.flow_layers;
      flc.bins = c.flow_bins;
      flc.bound = c.flow_bound;
      flow.emplace(flc, rng);
    }
  }

  std::vector<ad::NamedTensor> parameters() const {
    auto params = field.parameters();
    if (flow) {
      for (auto& p : flow->parameters()) params.push_back(std::move(p));
    }
    return params;
  }
};

ToyExperiment::ToyExperiment(const ExperimentConfig& config) {
  if (!is_toy_task(config.task)) throw ConfigError("task '" + to_string(config.task) + "' is not a toy task");
  config.validate();
  state_ = std::make_unique<State>(config, stream(config.seed, kInit));
}

ToyExperiment::~ToyExperiment() = default;
ToyExperiment::ToyExperiment(ToyExperiment&&) noexcept = default;
ToyExperiment& ToyExperiment::operator=(ToyExperiment&&) noexcept = default;

guidance::PathSpec ToyExperiment::path_spec() const {
  const auto& c = state_->config;
  guidance::PathSpec p;
  p.framework = uses_score(c.task) ? guidance::Framework::kScore : guidance::Framework::kFlowMatching;
  p.sde.sigma_lo = c.sigma_lo;
  p.sde.sigma_hi = c.sigma_hi;
  p.ot.sigma_min = c.sigma_min;
  p.weighting = c.weighting;
  p.t_eps = c.t_eps;
  return p;
}

guidance::GuidanceScaling ToyExperiment::scaling() const {
  return state_->config.task == Task::kToyFlowerFmTimeAdaptive ? guidance::GuidanceScaling::kTimeAdaptive
                                                               : guidance::GuidanceScaling::kConstant;
}

const paths::FieldNetwork& ToyExperiment::field() const { return state_->field; }
const flow::FlowStack* ToyExperiment::flow() const { return state_->flow ? &*state_->flow : nullptr; }

void ToyExperiment::train(RunRecord& record) {
  const auto& c = state_->config;
  ad::Adam opt(state_->parameters(), {.lr = c.lr});
  auto data_rng = stream(c.seed, kData);
  auto loss_rng = stream(c.seed, kLoss);
  guidance::JointOptions options;
  options.path = path_spec();
  options.scaling = scaling();
  options.detach_latent = c.detach_latent;
  for (std::size_t step = 0; step < c.train_steps; ++step) {
    if (c.lr_decay) opt.set_lr(c.lr * (1.0 - static_cast<double>(step) / static_cast<double>(c.train_steps)));
    const auto batch = paths::sample_toy(c.toy, c.batch, data_rng);
    opt.zero_grad();
    LossRow row{step, 0.0, 0.0, 0.0};
    if (state_->flow) {
      const auto loss = guidance::joint_loss(state_->field, *state_->flow, batch.x, batch.y, options, loss_rng);
      loss.total.backward();
      row.l_unet = loss.l_unet.item();
      row.l_nf = loss.l_nf.item();
      row.total = loss.total.item();
    } else {
      const auto loss = guidance::field_loss(state_->field, batch.x, batch.y, options.path, loss_rng);
      loss.backward();
      row.l_unet = row.total = loss.item();
    }
    record.losses.push_back(row);
    if (!std::isfinite(row.l_unet) || !std::isfinite(row.l_nf)) {
      record.set_probe("losses_finite", false);
      throw std::runtime_error("non-finite training loss at step " + std::to_string(step));
    }
    opt.step();
  }
  record.set_probe("losses_finite", true);
  const auto& last = record.losses.back();
  record.set_metric("final_l_unet", last.l_unet);
  if (state_->flow) record.set_metric("final_l_nf", last.l_nf);
  record.set_metric("final_total", last.total);
}

void ToyExperiment::evaluate(RunRecord& record, const std::string& out_dir) const {
  const auto& c = state_->config;
  const auto path = path_spec();
  auto test_rng = stream(c.seed, kTest);
  const auto test = paths::sample_toy(c.toy, c.test_rows, test_rng);
  const std::size_t dim = test.x.size(1);
  const std::uint64_t sampler_seed = stream_seed(c.seed, kSampler);
  const std::uint64_t guidance_seed = stream_seed(c.seed, kGuidance);
  const std::size_t flow_calls = state_->flow ? state_->flow->evaluation_count() : 0;

  for (std::size_t n : c.sampler_steps) {
    const paths::FieldFn fn =
        state_->flow ? guidance::bind_sampled_guidance(state_->field, test.y, path, scaling(), guidance_seed,
                                                       c.resample_per_step)
                     : guidance::bind_field(state_->field, test.y, path, nullptr);
    paths::SamplerConfig sc;
    sc.steps = n;
    sc.seed = sampler_seed;
    if (c.trajectory) sc.trajectory_csv = (fs::path(out_dir) / ("trajectory_n" + std::to_string(n) + ".csv")).string();
    const auto estimate = path.framework == guidance::Framework::kScore
                              ? paths::reverse_sde_sample(fn, c.test_rows, dim, path.sde, sc)
                              : paths::euler_sample(fn, c.test_rows, dim, sc);
    SampleRow row{n, paths::restoration_mse(estimate, test.x), metrics::si_sdr(test.x.data(), estimate.data())};
    record.samples.push_back(row);
    record.set_metric("mse_n" + std::to_string(n), row.mse);
    record.set_metric("si_sdr_n" + std::to_string(n), row.si_sdr);
  }
  record.set_metric("mse", record.samples.back().mse);
  record.set_metric("si_sdr", record.samples.back().si_sdr);
  if (!state_->flow) return;

  record.set_probe("flow_unused_at_inference", state_->flow->evaluation_count() == flow_calls);

  ad::NoGradGuard no_grad;
  auto latent_rng = stream(c.seed, kLatent);
  ad::Tensor x_t, t;
  if (path.framework == guidance::Framework::kScore) {
    const auto draw = paths::draw_score_inputs(c.test_rows, dim, latent_rng, path.t_eps);
    x_t = paths::sde_perturb(test.x, draw.t, draw.noise, path.sde);
    t = draw.t;
  } else {
    const auto draw = paths::draw_fm_inputs(c.test_rows, dim, latent_rng);
    x_t = paths::ot_interpolate(draw.x0, test.x, draw.t, path.ot);
    t = draw.t;
  }
  const auto latent = state_->field.trunk(x_t, test.y, t);
  const auto z = state_->flow->forward(test.x, latent).z;
  const auto rows = static_cast<double>(c.test_rows);
  for (std::size_t j = 0; j < dim; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t r = 0; r < c.test_rows; ++r) m += z.at(r * dim + j);
    m /= rows;
    for (std::size_t r = 0; r < c.test_rows; ++r) v += (z.at(r * dim + j) - m) * (z.at(r * dim + j) - m);
    record.set_metric("z" + std::to_string(j) + "_mean", m);
    record.set_metric("z" + std::to_string(j) + "_var", v / rows);
  }
  const auto info = flow::mi_upper_bound_check(z.data(), dim, latent.data(), latent.size(1), 1e-8);
  record.set_metric("mi_estimate", info.mi_estimate);
  record.set_metric("kl_estimate", info.kl_estimate);
  record.set_probe("mi_le_kl", info.mi_estimate <= info.kl_estimate + 1e-6);
  if (c.dump_guidance) guidance::write_guidance_csv((fs::path(out_dir) / "guidance_z.csv").string(), z);

  if (scaling() == guidance::GuidanceScaling::kTimeAdaptive) {
    const auto ctx = guidance::sample_guidance(c.test_rows, dim, guidance_seed, state_->field.projections(), scaling());
    const auto ones = paths::time_column(c.test_rows, 1.0);
    const auto guided = state_->field(test.y, test.y, ones, &ctx);
    const auto plain = state_->field(test.y, test.y, ones, nullptr);
    record.set_probe("zero_guidance_at_t1", std::equal(guided.data().begin(), guided.data().end(), plain.data().begin()));
  }
}

void ToyExperiment::set_resample_per_step(bool resample) { state_->config.resample_per_step = resample; }

void ToyExperiment::save(const std::string& path) const { ad::save_checkpoint(path, state_->parameters()); }

void ToyExperiment::load(const std::string& path) {
  auto params = state_->parameters();
  ad::restore_checkpoint(path, params);
}

RunRecord run(const ExperimentConfig& config, const std::string& out_dir, Phase phase, const std::string& checkpoint) {
  config.validate();
  if (phase != Phase::kFull && !is_toy_task(config.task)) {
    throw ConfigError("task '" + to_string(config.task) + "' has no separate train/sample phases");
  }
  RunRecord rec;
  rec.config = config;
  rec.build = build_id();
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir(out_dir);
  try {
    fs::create_directories(dir);
    if (is_toy_task(config.task)) {
      ToyExperiment exp(config);
      const std::string ckpt = checkpoint.empty() ? (dir / "checkpoint.bin").string() : checkpoint;
      if (phase == Phase::kSample) {
        exp.load(ckpt);
      } else {
        exp.train(rec);
        exp.save(ckpt);
      }
      if (phase != Phase::kTrain) exp.evaluate(rec, out_dir);
    } else if (config.task == Task::kDistort) {
      run_distort(config, dir, rec);
    } else if (config.task == Task::kEvaluate) {
      run_evaluate(config, dir, rec);
    } else {
      run_euler_check(config, rec);
    }
  } catch (const std::exception& e) {
    rec.status = "failed";
    rec.error = e.what();
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    write_record(out_dir, rec);
  } catch (const std::exception& e) {
    rec.status = "failed";
    if (rec.error.empty()) rec.error = e.what();
  }
  return rec;
}

SweepResult sweep(const ExperimentConfig& base, const std::string& param, const std::vector<std::string>& values,
                  const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
  if (!is_numeric_key(param)) throw ConfigError("sweep parameter '" + param + "' is not numeric");
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  {
    ExperimentConfig probe = base;
    for (const auto& v : values) set_value(probe, param, v);
  }
  const auto seed_list = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;
  SweepResult result;
  result.param = param;
  std::string csv = "value,metric,mean,std_error,runs,failed\n";
  for (const auto& value : values) {
    std::vector<const RunRecord*> ok;
    std::size_t failed = 0;
    const std::size_t first = result.runs.size();
    for (auto seed : seed_list) {
      ExperimentConfig cfg = base;
      set_value(cfg, param, value);
      cfg.seed = seed;
      const auto dir = (fs::path(out_dir) / (param + "=" + value) / ("seed-" + std::to_string(seed))).string();
      RunRecord rec;
      try {
        rec = run(cfg, dir);
      } catch (const std::exception& e) {
        rec.config = cfg;
        rec.build = build_id();
        rec.status = "failed";
        rec.error = e.what();
        write_record(dir, rec);
      }
      result.runs.push_back(std::move(rec));
    }
    for (std::size_t i = first; i < result.runs.size(); ++i) {
      if (result.runs[i].ok()) {
        ok.push_back(&result.runs[i]);
      } else {
        ++failed;
      }
    }
    if (ok.empty()) {
      result.summary.push_back({value, "", 0.0, 0.0, 0, failed});
      csv += value + ",,,,0," + std::to_string(failed) + "\n";
      continue;
    }
    for (const auto& [name, unused] : ok.front()->metrics) {
      std::vector<double> xs;
      for (const auto* r : ok) {
        if (r->has_metric(name)) xs.push_back(r->metric(name));
      }
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      const double se =
          xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size())) : 0.0;
      result.summary.push_back({value, name, mean, se, xs.size(), failed});
      csv += value + "," + name + "," + fmt17(mean) + "," + fmt17(se) + "," + std::to_string(xs.size()) + "," +
             std::to_string(failed) + "\n";
    }
  }
  fs::create_directories(out_dir);
  write_atomic(fs::path(out_dir) / "sweep.csv", csv);
  return result;
}

}  // namespace flower::experiment
