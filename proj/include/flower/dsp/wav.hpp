// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flower::dsp {

inline constexpr std::uint32_t kSampleRate = 16000;

/// Mono audio. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  std::uint32_t sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  /// Throws std::invalid_argument on a non-positive rate or non-finite samples.
  void validate() const;
};

enum class WavFormat { kPcm16, kFloat32 };

/// Reads a mono 16 kHz RIFF/WAVE file, 16-bit PCM or 32-bit IEEE float.
/// Anything else (stereo, other rates, 24-bit, ...) is rejected with
/// std::runtime_error naming the offending field.
AudioBuffer read_wav(const std::string& path);

/// PCM16 scales by 32768, rounds to nearest and saturates at the int16
/// range, so decoded PCM16 samples re-encode unchanged.
void write_wav(const std::string& path, const AudioBuffer& audio, WavFormat format = WavFormat::kFloat32);

/// In-memory variants of the above, for tests and replay checks.
AudioBuffer decode_wav(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio, WavFormat format = WavFormat::kFloat32);

}  // namespace flower::dsp
