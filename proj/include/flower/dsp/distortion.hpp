// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flower/dsp/iir.hpp"
#include "flower/dsp/wav.hpp"

namespace flower::dsp {

/// Mean square over the whole buffer (no voice-activity gating).
double signal_power(std::span<const double> x);

/// `noise` tiled (wrapping around) or truncated to `length`, starting at
/// `offset`.
std::vector<double> fit_noise(std::span<const double> noise, std::size_t length, std::size_t offset = 0);

struct MixResult {
  AudioBuffer noisy;
  /// Factor applied to the fitted noise.
  double gain = 0.0;
};

/// speech + gain * fit_noise(noise, |speech|) with gain chosen so the power
/// ratio is exactly snr_db. snr_db = +inf adds nothing. Throws
/// std::invalid_argument if either input is silent.
MixResult mix_at_snr(const AudioBuffer& speech, const AudioBuffer& noise, double snr_db, std::size_t offset = 0);

/// Parameter ranges the random recipe draws from.
struct DistortionRanges {
  double snr_lo = 0.0, snr_hi = 20.0;
  double rt60_lo = 0.3, rt60_hi = 0.9;
  double cutoff_lo = 2000.0, cutoff_hi = 4000.0;
};

/// One recipe for y = h(x * r) + n.
struct DistortionSpec {
  double snr_db = 10.0;
  double rt60_s = 0.6;
  double cutoff_hz = 3000.0;
  FilterFamily family = FilterFamily::kButterworth;
  std::size_t order = 8;
  double ripple_db = 0.5;
  double rir_length_s = 1.0;
  std::uint64_t noise_seed = 0;
  std::uint64_t rir_seed = 0;
  /// Room width, depth, height in metres. Recorded only; the RIR model is
  /// controlled by rt60 alone.
  std::array<double, 3> room_m{7.5, 7.5, 4.0};

  /// Basic sanity (order, finite values). With `strict`, also the ranges in
  /// `ranges`; sentinels rt60 = 0 and snr = +inf are rejected then.
  void validate(bool strict, const DistortionRanges& ranges = {}) const;
};

/// Draws snr, rt60, cutoff uniformly from `ranges`, the room from 5-10 m
/// floors and 2-6 m heights, and fresh noise/RIR seeds.
DistortionSpec sample_distortion_spec(std::mt19937_64& rng, const DistortionRanges& ranges = {},
                                      FilterFamily family = FilterFamily::kButterworth, std::size_t order = 8);

struct DistortionResult {
  AudioBuffer y;
  /// h(x * r), before noise.
  AudioBuffer filtered;
  /// The noise actually added (gain applied).
  AudioBuffer noise;
  double noise_gain = 0.0;
};

/// y = lowpass(clean * rir) + n. The RIR comes from rir_seed; the noise is
/// `noise_source` starting at an offset drawn from noise_seed, or white
/// Gaussian noise from noise_seed when `noise_source` is empty. rt60 = 0
/// skips reverb, snr = +inf skips noise.
DistortionResult distort(const AudioBuffer& clean, const AudioBuffer& noise_source, const DistortionSpec& spec);

/// One JSON-lines manifest entry.
struct ManifestRecord {
  std::string input;
  std::string output;
  std::string noise;
  DistortionSpec spec;
};

std::string to_json_line(const ManifestRecord& record);
ManifestRecord parse_manifest_line(const std::string& line);
std::vector<ManifestRecord> read_manifest(const std::string& path);

}  // namespace flower::dsp
