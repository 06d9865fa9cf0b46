// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/dsp/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace flower::dsp {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV codec assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <class T>
T load(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  if (offset + sizeof(T) > bytes.size()) throw std::runtime_error("truncated WAV data");
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

template <class T>
void store(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

bool tag_is(const std::vector<std::uint8_t>& bytes, std::size_t offset, const char* tag) {
  return offset + 4 <= bytes.size() && std::memcmp(bytes.data() + offset, tag, 4) == 0;
}

}  // namespace

void AudioBuffer::validate() const {
  if (sample_rate == 0) throw std::invalid_argument("sample rate must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) throw std::invalid_argument("non-finite sample at index " + std::to_string(i));
  }
}

AudioBuffer decode_wav(const std::vector<std::uint8_t>& bytes) {
  if (!tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) throw std::runtime_error("not a RIFF/WAVE file");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto size = load<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (tag_is(bytes, pos, "fmt ")) {
      if (size < 16) throw std::runtime_error("fmt chunk too short");
      format = load<std::uint16_t>(bytes, body);
      channels = load<std::uint16_t>(bytes, body + 2);
      rate = load<std::uint32_t>(bytes, body + 4);
      bits = load<std::uint16_t>(bytes, body + 14);
      if (format == kFormatExtensible && size >= 40) format = load<std::uint16_t>(bytes, body + 24);
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw std::runtime_error("data chunk before fmt chunk");
      if (channels != 1) throw std::runtime_error("only mono WAV is supported, got " + std::to_string(channels) + " channels");
      if (rate != kSampleRate) throw std::runtime_error("only 16000 Hz WAV is supported, got " + std::to_string(rate));
      const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
      AudioBuffer out;
      out.sample_rate = rate;
      if (format == kFormatPcm && bits == 16) {
        out.samples.resize(avail / 2);
        for (std::size_t i = 0; i < out.samples.size(); ++i) {
          out.samples[i] = static_cast<double>(load<std::int16_t>(bytes, body + 2 * i)) / 32768.0;
        }
      } else if (format == kFormatFloat && bits == 32) {
        out.samples.resize(avail / 4);
        for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = load<float>(bytes, body + 4 * i);
      } else {
        throw std::runtime_error("unsupported WAV encoding: format " + std::to_string(format) + ", " +
                                 std::to_string(bits) + " bits");
      }
      out.validate();
      return out;
    }
    pos = body + size + (size & 1u);
  }
  throw std::runtime_error("WAV file has no data chunk");
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio, WavFormat format) {
  audio.validate();
  const bool pcm = format == WavFormat::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(audio.samples.size() * block);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  store<std::uint32_t>(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  store<std::uint32_t>(out, 16);
  store<std::uint16_t>(out, pcm ? kFormatPcm : kFormatFloat);
  store<std::uint16_t>(out, 1);
  store<std::uint32_t>(out, audio.sample_rate);
  store<std::uint32_t>(out, audio.sample_rate * block);
  store<std::uint16_t>(out, block);
  store<std::uint16_t>(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  store<std::uint32_t>(out, data_size);
  for (double s : audio.samples) {
    if (pcm) {
      const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      store<std::int16_t>(out, static_cast<std::int16_t>(scaled));
    } else {
      store<float>(out, static_cast<float>(s));
    }
  }
  return out;
}

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_wav(const std::string& path, const AudioBuffer& audio, WavFormat format) {
  const auto bytes = encode_wav(audio, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace flower::dsp
