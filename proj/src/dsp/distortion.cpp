// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/dsp/distortion.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <stdexcept>

#include "flower/dsp/reverb.hpp"

namespace flower::dsp {

namespace {

void check_range(const char* name, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) {
    throw std::invalid_argument(std::string(name) + " = " + std::to_string(v) + " is outside [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + "]");
  }
}

}  // namespace

double signal_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

std::vector<double> fit_noise(std::span<const double> noise, std::size_t length, std::size_t offset) {
  if (noise.empty()) throw std::invalid_argument("noise source is empty");
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = noise[(offset + i) % noise.size()];
  return out;
}

MixResult mix_at_snr(const AudioBuffer& speech, const AudioBuffer& noise, double snr_db, std::size_t offset) {
  if (std::isnan(snr_db) || snr_db == -INFINITY) throw std::invalid_argument("snr must be a number or +inf");
  const double ps = signal_power(speech.samples);
  if (!(ps > 0.0)) throw std::invalid_argument("speech is silent");
  MixResult out;
  out.noisy = speech;
  if (snr_db == INFINITY) return out;
  const auto fitted = fit_noise(noise.samples, speech.size(), offset);
  const double pn = signal_power(fitted);
  if (!(pn > 0.0)) throw std::invalid_argument("noise is silent");
  out.gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  for (std::size_t i = 0; i < fitted.size(); ++i) out.noisy.samples[i] += out.gain * fitted[i];
  return out;
}

void DistortionSpec::validate(bool strict, const DistortionRanges& ranges) const {
  if (order == 0) throw std::invalid_argument("filter order must be >= 1");
  if (!(rt60_s >= 0.0) || !std::isfinite(rt60_s)) throw std::invalid_argument("rt60 must be finite and >= 0");
  if (std::isnan(snr_db) || snr_db == -INFINITY) throw std::invalid_argument("snr must be a number or +inf");
  if (!(cutoff_hz > 0.0)) throw std::invalid_argument("cutoff must be positive");
  if (!(rir_length_s > 0.0)) throw std::invalid_argument("rir length must be positive");
  if (!strict) return;
  check_range("snr_db", snr_db, ranges.snr_lo, ranges.snr_hi);
  check_range("rt60_s", rt60_s, ranges.rt60_lo, ranges.rt60_hi);
  check_range("cutoff_hz", cutoff_hz, ranges.cutoff_lo, ranges.cutoff_hi);
}

DistortionSpec sample_distortion_spec(std::mt19937_64& rng, const DistortionRanges& ranges, FilterFamily family,
                                      std::size_t order) {
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  DistortionSpec spec;
  spec.snr_db = uniform(ranges.snr_lo, ranges.snr_hi);
  spec.rt60_s = uniform(ranges.rt60_lo, ranges.rt60_hi);
  spec.cutoff_hz = uniform(ranges.cutoff_lo, ranges.cutoff_hi);
  spec.family = family;
  spec.order = order;
  spec.room_m = {uniform(5.0, 10.0), uniform(5.0, 10.0), uniform(2.0, 6.0)};
  spec.noise_seed = rng();
  spec.rir_seed = rng();
  return spec;
}

DistortionResult distort(const AudioBuffer& clean, const AudioBuffer& noise_source, const DistortionSpec& spec) {
  spec.validate(false);
  clean.validate();
  DistortionResult out;
  const AudioBuffer rir = synthesize_rir(spec.rt60_s, spec.rir_length_s, spec.rir_seed, clean.sample_rate);
  out.filtered = lowpass(reverberate(clean, rir), spec.cutoff_hz, spec.family, spec.order, spec.ripple_db);

  std::mt19937_64 noise_rng(spec.noise_seed);
  AudioBuffer noise = noise_source;
  if (noise.samples.empty()) {
    std::normal_distribution<double> normal;
    noise.samples.resize(clean.size());
    for (auto& v : noise.samples) v = normal(noise_rng);
  }
  const std::size_t offset = std::uniform_int_distribution<std::size_t>(0, noise.size() - 1)(noise_rng);
  const MixResult mix = mix_at_snr(out.filtered, noise, spec.snr_db, offset);
  out.y = mix.noisy;
  out.noise_gain = mix.gain;
  out.noise.sample_rate = clean.sample_rate;
  out.noise.samples.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) out.noise.samples[i] = out.y.samples[i] - out.filtered.samples[i];
  return out;
}

std::string to_json_line(const ManifestRecord& r) {
  nlohmann::ordered_json j;
  j["input"] = r.input;
  j["output"] = r.output;
  j["noise"] = r.noise;
  if (std::isinf(r.spec.snr_db)) {
    j["snr_db"] = "inf";
  } else {
    j["snr_db"] = r.spec.snr_db;
  }
  j["rt60_s"] = r.spec.rt60_s;
  j["cutoff_hz"] = r.spec.cutoff_hz;
  j["family"] = to_string(r.spec.family);
  j["order"] = r.spec.order;
  j["ripple_db"] = r.spec.ripple_db;
  j["rir_length_s"] = r.spec.rir_length_s;
  j["noise_seed"] = r.spec.noise_seed;
  j["rir_seed"] = r.spec.rir_seed;
  j["room_m"] = r.spec.room_m;
  j["snr_measure"] = "full-utterance power";
  return j.dump();
}

ManifestRecord parse_manifest_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  ManifestRecord r;
  r.input = j.at("input").get<std::string>();
  r.output = j.at("output").get<std::string>();
  r.noise = j.value("noise", std::string());
  const auto& snr = j.at("snr_db");
  r.spec.snr_db = snr.is_string() && snr.get<std::string>() == "inf" ? INFINITY : snr.get<double>();
  r.spec.rt60_s = j.at("rt60_s").get<double>();
  r.spec.cutoff_hz = j.at("cutoff_hz").get<double>();
  r.spec.family = parse_filter_family(j.at("family").get<std::string>());
  r.spec.order = j.at("order").get<std::size_t>();
  r.spec.ripple_db = j.value("ripple_db", r.spec.ripple_db);
  r.spec.rir_length_s = j.value("rir_length_s", r.spec.rir_length_s);
  r.spec.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  r.spec.rir_seed = j.at("rir_seed").get<std::uint64_t>();
  if (j.contains("room_m")) r.spec.room_m = j.at("room_m").get<std::array<double, 3>>();
  r.spec.validate(false);
  return r;
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_manifest_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace flower::dsp
