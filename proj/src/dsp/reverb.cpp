// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/dsp/reverb.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "flower/dsp/fft.hpp"

namespace flower::dsp {

AudioBuffer synthesize_rir(double rt60_s, double length_s, std::uint64_t seed, std::uint32_t sample_rate) {
  if (!(rt60_s >= 0.0) || !std::isfinite(rt60_s)) throw std::invalid_argument("rt60 must be finite and >= 0");
  AudioBuffer rir;
  rir.sample_rate = sample_rate;
  if (rt60_s == 0.0) {
    rir.samples = {1.0};
    return rir;
  }
  if (!(length_s > 0.0)) throw std::invalid_argument("RIR length must be positive");
  const auto n = static_cast<std::size_t>(std::ceil(length_s * sample_rate));
  const double decay = 3.0 * std::log(10.0) / (rt60_s * sample_rate);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  rir.samples.resize(n);
  double energy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    rir.samples[k] = normal(rng) * std::exp(-decay * static_cast<double>(k));
    energy += rir.samples[k] * rir.samples[k];
  }
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& v : rir.samples) v *= scale;
  return rir;
}

std::vector<double> energy_decay_db(std::span<const double> rir) {
  std::vector<double> edc(rir.size());
  double tail = 0.0;
  for (std::size_t k = rir.size(); k-- > 0;) {
    tail += rir[k] * rir[k];
    edc[k] = tail;
  }
  if (rir.empty() || !(edc[0] > 0.0)) throw std::invalid_argument("impulse response has no energy");
  const double total = edc[0];
  for (auto& v : edc) v = 10.0 * std::log10(std::max(v / total, 1e-300));
  return edc;
}

double estimate_rt60(std::span<const double> rir, std::uint32_t sample_rate) {
  const auto edc = energy_decay_db(rir);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t count = 0;
  bool reached = false;
  for (std::size_t k = 0; k < edc.size(); ++k) {
    if (edc[k] < -25.0) {
      reached = true;
      break;
    }
    if (edc[k] > -5.0) continue;
    const double t = static_cast<double>(k) / sample_rate;
    sx += t;
    sy += edc[k];
    sxx += t * t;
    sxy += t * edc[k];
    ++count;
  }
  if (!reached || count < 2) throw std::runtime_error("decay curve does not span -5 to -25 dB");
  const double n = static_cast<double>(count);
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);  // dB per second
  return -60.0 / slope;
}

AudioBuffer reverberate(const AudioBuffer& x, const AudioBuffer& rir) {
  if (x.sample_rate != rir.sample_rate) throw std::invalid_argument("signal and RIR sample rates differ");
  AudioBuffer out;
  out.sample_rate = x.sample_rate;
  if (rir.samples.size() == 1) {
    out.samples = x.samples;
    for (auto& v : out.samples) v *= rir.samples[0];
    return out;
  }
  out.samples = fft_convolve(x.samples, rir.samples);
  out.samples.resize(x.samples.size());
  return out;
}

}  // namespace flower::dsp
