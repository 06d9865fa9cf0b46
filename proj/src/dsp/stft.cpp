// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/dsp/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace flower::dsp {

namespace {

constexpr double kNolaFloor = 1e-10;

struct Framing {
  std::size_t pad = 0;     // zeros before the signal
  std::size_t frames = 0;  // frames covering the padded signal
};

Framing framing(const StftConfig& c, std::size_t length) {
  Framing f;
  f.pad = c.center ? c.window_len / 2 : 0;
  const std::size_t padded = length + 2 * f.pad;
  f.frames = 1 + (padded - c.window_len + c.hop - 1) / c.hop;
  if (!c.center) f.frames = 1 + (length - c.window_len) / c.hop;
  return f;
}

}  // namespace

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

Stft::Stft(const StftConfig& config) : config_(config) {
  if (config.window_len == 0 || config.hop == 0) throw std::invalid_argument("STFT window and hop must be positive");
  if (config.hop > config.window_len) {
    throw std::invalid_argument("STFT hop " + std::to_string(config.hop) + " exceeds window " +
                                std::to_string(config.window_len));
  }
  if (config.fft_len < config.window_len) throw std::invalid_argument("STFT fft_len must be >= window_len");
  window_ = hann_window(config.window_len);
  // Steady-state squared-window sum over one hop period.
  double lo = INFINITY, hi = 0.0;
  for (std::size_t n = 0; n < config.hop; ++n) {
    double acc = 0.0;
    for (std::size_t i = n; i < config.window_len; i += config.hop) acc += window_[i] * window_[i];
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
  }
  if (!(lo > kNolaFloor * hi)) {
    throw std::invalid_argument("STFT window/hop violate the nonzero overlap-add condition");
  }
  fft_ = std::make_shared<RealFft>(config.fft_len);
}

Spectrogram Stft::forward(std::span<const double> signal, std::uint32_t sample_rate) const {
  const auto& c = config_;
  if (signal.size() < c.window_len) {
    throw std::invalid_argument("signal of " + std::to_string(signal.size()) + " samples is shorter than the " +
                                std::to_string(c.window_len) + "-sample window");
  }
  const Framing f = framing(c, signal.size());
  Spectrogram spec;
  spec.frames = f.frames;
  spec.bins = c.fft_len / 2 + 1;
  spec.values.resize(spec.frames * spec.bins);
  spec.config = c;
  spec.signal_length = signal.size();
  spec.sample_rate = sample_rate;
  std::vector<double> frame(c.fft_len);
  for (std::size_t k = 0; k < f.frames; ++k) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t i = 0; i < c.window_len; ++i) {
      const std::size_t p = k * c.hop + i;  // index into the padded signal
      if (p >= f.pad && p - f.pad < signal.size()) frame[i] = window_[i] * signal[p - f.pad];
    }
    fft_->forward(frame, std::span(spec.values).subspan(k * spec.bins, spec.bins));
  }
  return spec;
}

std::vector<double> Stft::inverse(const Spectrogram& spec) const {
  const auto& c = config_;
  if (spec.config.window_len != c.window_len || spec.config.hop != c.hop || spec.config.fft_len != c.fft_len ||
      spec.config.center != c.center) {
    throw std::invalid_argument("spectrogram was computed with a different STFT config");
  }
  const Framing f = framing(c, spec.signal_length);
  if (spec.frames != f.frames || spec.bins != c.fft_len / 2 + 1) {
    throw std::invalid_argument("spectrogram shape does not match its signal length");
  }
  const std::size_t total = (f.frames - 1) * c.hop + c.window_len;
  std::vector<double> acc(total, 0.0), norm(total, 0.0), frame(c.fft_len);
  const double scale = 1.0 / static_cast<double>(c.fft_len);
  for (std::size_t k = 0; k < f.frames; ++k) {
    fft_->inverse(std::span(spec.values).subspan(k * spec.bins, spec.bins), frame);
    for (std::size_t i = 0; i < c.window_len; ++i) {
      acc[k * c.hop + i] += window_[i] * frame[i] * scale;
      norm[k * c.hop + i] += window_[i] * window_[i];
    }
  }
  const double floor = kNolaFloor * *std::max_element(norm.begin(), norm.end());
  std::vector<double> out(spec.signal_length, 0.0);
  for (std::size_t n = 0; n < out.size(); ++n) {
    const std::size_t p = n + f.pad;
    if (p < total && norm[p] > floor) out[n] = acc[p] / norm[p];
  }
  return out;
}

Spectrogram stft(const AudioBuffer& audio, const StftConfig& config) {
  return Stft(config).forward(audio.samples, audio.sample_rate);
}

AudioBuffer istft(const Spectrogram& spec) {
  AudioBuffer out;
  out.samples = Stft(spec.config).inverse(spec);
  out.sample_rate = spec.sample_rate;
  return out;
}

}  // namespace flower::dsp
