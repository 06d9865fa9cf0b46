// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "flower/dsp/fft.hpp"
#include "flower/dsp/wav.hpp"

namespace flower::dsp {

/// Periodic Hann window: 0.5 - 0.5 cos(2 pi n / N).
std::vector<double> hann_window(std::size_t n);

struct StftConfig {
  std::size_t window_len = 510;
  std::size_t hop = 128;
  /// >= window_len; frames are zero-padded at the end. Bin k sits at
  /// k * sample_rate / fft_len Hz.
  std::size_t fft_len = 510;
  /// Pad window_len / 2 zeros on both sides so every input sample lies
  /// well inside some frame.
  bool center = true;
};

struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  /// Row-major [frames x bins].
  std::vector<std::complex<double>> values;
  StftConfig config;
  /// Length of the analysed signal, used by the inverse.
  std::size_t signal_length = 0;
  std::uint32_t sample_rate = kSampleRate;

  std::complex<double> at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
  double bin_frequency(std::size_t bin) const {
    return static_cast<double>(bin) * sample_rate / static_cast<double>(config.fft_len);
  }
};

/// Short-time Fourier transform with weighted overlap-add inversion: the
/// inverse divides by the summed squared window, so any hop with nonzero
/// window overlap (NOLA) reconstructs exactly.
class Stft {
 public:
  /// Throws std::invalid_argument when hop > window_len, fft_len <
  /// window_len, or the squared-window overlap vanishes somewhere (NOLA).
  explicit Stft(const StftConfig& config = {});

  Spectrogram forward(std::span<const double> signal, std::uint32_t sample_rate = kSampleRate) const;
  std::vector<double> inverse(const Spectrogram& spec) const;

  const StftConfig& config() const { return config_; }
  const std::vector<double>& window() const { return window_; }

 private:
  StftConfig config_;
  std::vector<double> window_;
  std::shared_ptr<RealFft> fft_;
};

Spectrogram stft(const AudioBuffer& audio, const StftConfig& config = {});
AudioBuffer istft(const Spectrogram& spec);

}  // namespace flower::dsp
