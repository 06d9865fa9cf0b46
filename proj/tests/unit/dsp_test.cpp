// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "flower/dsp/distortion.hpp"
#include "flower/dsp/fft.hpp"
#include "flower/dsp/iir.hpp"
#include "flower/dsp/reverb.hpp"
#include "flower/dsp/stft.hpp"
#include "flower/dsp/wav.hpp"
#include "oracles.hpp"

using namespace flower;
using dsp::AudioBuffer;
using dsp::FilterFamily;

namespace {

constexpr double kFs = 16000.0;

AudioBuffer sine(double freq, std::size_t n, double amp = 1.0, double phase = 0.0) {
  AudioBuffer a;
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / kFs + phase);
  return a;
}

// White noise through a one-pole lowpass: more energy at low frequencies.
AudioBuffer speech_shaped(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto w = testing::normal_vector(rng, n);
  AudioBuffer a;
  a.samples.resize(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = s = 0.95 * s + w[i];
  return a;
}

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

// Amplitude of the component at `freq` by direct correlation over [from, end).
double tone_amplitude(const std::vector<double>& x, double freq, std::size_t from = 0) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = from; i < x.size(); ++i) {
    acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * freq * i / kFs);
  }
  return 2.0 * std::abs(acc) / static_cast<double>(x.size() - from);
}

double steady_state_gain_db(const std::vector<dsp::Biquad>& sections, double freq) {
  const auto x = sine(freq, 32000);
  const auto y = dsp::filter_cascade(sections, x.samples);
  if (freq == 0.0) return 0.0;
  return 20.0 * std::log10(tone_amplitude(y, freq, 16000) / tone_amplitude(x.samples, freq, 16000));
}

// Digital Butterworth magnitude after a prewarped bilinear transform.
double butterworth_oracle(double f, double fc, std::size_t order) {
  const double r = std::tan(std::numbers::pi * f / kFs) / std::tan(std::numbers::pi * fc / kFs);
  return 1.0 / std::sqrt(1.0 + std::pow(r, 2.0 * static_cast<double>(order)));
}

double chebyshev_poly(std::size_t n, double x) {
  if (std::abs(x) <= 1.0) return std::cos(static_cast<double>(n) * std::acos(x));
  return std::cosh(static_cast<double>(n) * std::acosh(std::abs(x))) * ((x < 0.0 && n % 2 == 1) ? -1.0 : 1.0);
}

double chebyshev_oracle(double f, double fc, std::size_t order, double ripple_db) {
  const double r = std::tan(std::numbers::pi * f / kFs) / std::tan(std::numbers::pi * fc / kFs);
  const double eps2 = std::pow(10.0, ripple_db / 10.0) - 1.0;
  const double t = chebyshev_poly(order, r);
  return 1.0 / std::sqrt(1.0 + eps2 * t * t);
}

// Energy in STFT bins at or above `split_hz`, summed over frames.
double band_energy(const AudioBuffer& a, double split_hz) {
  const auto spec = dsp::stft(a);
  double e = 0.0;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    for (std::size_t b = 0; b < spec.bins; ++b) {
      if (spec.bin_frequency(b) >= split_hz) e += std::norm(spec.at(f, b));
    }
  }
  return e;
}

}  // namespace

TEST_CASE("wav round trip in float and pcm16") {
  auto a = speech_shaped(1000, 1);
  for (auto& v : a.samples) v *= 0.05;
  const auto f = dsp::decode_wav(dsp::encode_wav(a, dsp::WavFormat::kFloat32));
  REQUIRE(f.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(f.samples[i] == doctest::Approx(a.samples[i]).epsilon(1e-6));
  const auto p = dsp::decode_wav(dsp::encode_wav(a, dsp::WavFormat::kPcm16));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(p.samples[i] - a.samples[i]) <= 0.5 / 32768.0 + 1e-12);

  const auto dir = std::filesystem::temp_directory_path() / "flower_dsp_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "a.wav").string();
  dsp::write_wav(path, a);
  CHECK(dsp::read_wav(path).size() == a.size());
}

TEST_CASE("wav rejects stereo and other sample rates") {
  AudioBuffer a = sine(440.0, 64);
  a.sample_rate = 8000;
  CHECK_THROWS_AS(dsp::decode_wav(dsp::encode_wav(a)), std::runtime_error);
  a.sample_rate = 16000;
  auto bytes = dsp::encode_wav(a);
  bytes[22] = 2;  // channel count in the canonical fmt chunk
  CHECK_THROWS_AS(dsp::decode_wav(bytes), std::runtime_error);
  CHECK_THROWS_AS(dsp::read_wav("/nonexistent/x.wav"), std::runtime_error);
}

TEST_CASE("fft matches the DFT definition and convolution matches direct sum") {
  std::mt19937_64 rng(3);
  const auto x = testing::normal_vector(rng, 30);
  dsp::RealFft fft(30);
  std::vector<std::complex<double>> out(fft.bins());
  fft.forward(x, out);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> ref = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) ref += x[n] * std::polar(1.0, -2.0 * std::numbers::pi * k * n / 30.0);
    CHECK(std::abs(out[k] - ref) < 1e-10);
  }
  const auto h = testing::normal_vector(rng, 7);
  const auto y = dsp::fft_convolve(x, h);
  REQUIRE(y.size() == x.size() + h.size() - 1);
  for (std::size_t n = 0; n < y.size(); ++n) {
    double ref = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
      if (n >= k && n - k < x.size()) ref += h[k] * x[n - k];
    }
    CHECK(std::abs(y[n] - ref) < 1e-10);
  }
  CHECK(dsp::fast_fft_size(1031) == 1050);
}

TEST_CASE("stft of a 1 kHz sine peaks at the nearest bin") {
  const auto spec = dsp::stft(sine(1000.0, 8000));
  CHECK(spec.bins == 256);
  const std::size_t expected = static_cast<std::size_t>(std::lround(1000.0 * 510.0 / 16000.0));
  CHECK(expected == 32);
  for (std::size_t f = 2; f + 2 < spec.frames; ++f) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < spec.bins; ++b) {
      if (std::abs(spec.at(f, b)) > std::abs(spec.at(f, best))) best = b;
    }
    CHECK(best == expected);
  }
}

TEST_CASE("stft of silence is zero") {
  AudioBuffer a;
  a.samples.assign(2000, 0.0);
  const auto spec = dsp::stft(a);
  for (const auto& v : spec.values) CHECK(v == std::complex<double>(0.0, 0.0));
}

TEST_CASE("stft round trip reconstructs speech-shaped noise") {
  const auto a = speech_shaped(16000, 5);
  const auto spec = dsp::stft(a);
  const auto b = dsp::istft(spec);
  REQUIRE(b.size() == a.size());
  const double rel = testing::relative_error(b.samples, a.samples);
  CHECK(rel < 1e-3);
  CHECK(20.0 * std::log10(rel) < -60.0);

  // Overlap-add oracle written from scratch: window, DFT, inverse DFT, sum.
  const auto w = dsp::hann_window(510);
  CHECK(w[0] == 0.0);
  CHECK(w[255] == doctest::Approx(1.0));
  CHECK(w[100] == doctest::Approx(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * 100.0 / 510.0)));
}

TEST_CASE("stft config errors") {
  CHECK_THROWS_AS(dsp::Stft({510, 600, 510, true}), std::invalid_argument);
  CHECK_THROWS_AS(dsp::Stft({510, 510, 510, true}), std::invalid_argument);  // Hann zero at frame edges
  CHECK_THROWS_AS(dsp::Stft({510, 128, 256, true}), std::invalid_argument);
  CHECK_NOTHROW(dsp::Stft({512, 128, 1024, true}));
  CHECK_THROWS_AS(dsp::stft(sine(100.0, 400)), std::invalid_argument);
}

TEST_CASE("rir has unit energy and the requested decay") {
  double prev_tail = 0.0;
  for (double rt60 : {0.3, 0.6, 0.9}) {
    const auto rir = dsp::synthesize_rir(rt60, 1.5, 11);
    CHECK(std::abs(energy(rir.samples) - 1.0) < 1e-9);
    const double est = dsp::estimate_rt60(rir.samples);
    CHECK(est >= 0.8 * rt60);
    CHECK(est <= 1.2 * rt60);
    const std::vector<double> tail(rir.samples.begin() + static_cast<std::ptrdiff_t>(rir.size() / 2), rir.samples.end());
    CHECK(energy(tail) > prev_tail);
    prev_tail = energy(tail);
  }
  const auto delta = dsp::synthesize_rir(0.0, 0.1, 1);
  CHECK(delta.samples[0] == 1.0);
  CHECK(energy(delta.samples) == 1.0);
  CHECK_THROWS_AS(dsp::synthesize_rir(-1.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("schroeder curve starts at 0 dB and is non-increasing") {
  const auto rir = dsp::synthesize_rir(0.5, 1.0, 2);
  const auto edc = dsp::energy_decay_db(rir.samples);
  CHECK(edc[0] == doctest::Approx(0.0));
  for (std::size_t i = 1; i < edc.size(); ++i) CHECK(edc[i] <= edc[i - 1] + 1e-9);
}

TEST_CASE("butterworth lowpass meets the analytic response") {
  const auto design = dsp::design_lowpass(3000.0, FilterFamily::kButterworth, 4, kFs);
  CHECK(design.sections.size() == 2);
  for (const auto& p : design.poles) CHECK(std::abs(p) < 1.0);
  const double at_cutoff = steady_state_gain_db(design.sections, 3000.0);
  CHECK(std::abs(at_cutoff + 3.0) <= 0.5);

  AudioBuffer dc;
  dc.samples.assign(8000, 1.0);
  const auto y = dsp::lowpass(dc, 3000.0, FilterFamily::kButterworth, 4);
  CHECK(std::abs(20.0 * std::log10(y.samples.back())) <= 0.1);

  const double at_double = -steady_state_gain_db(design.sections, 6000.0);
  CHECK(at_double >= 6.0 * 4 - 10.0);
  CHECK(at_double >= -20.0 * std::log10(1.0 / std::sqrt(1.0 + std::pow(2.0, 8.0))));

  for (double f : {0.0, 500.0, 2000.0, 3000.0, 4500.0, 7000.0}) {
    for (std::size_t order : {1u, 2u, 5u, 8u}) {
      const auto d = dsp::design_lowpass(2500.0, FilterFamily::kButterworth, order, kFs);
      CHECK(dsp::magnitude_response(d.sections, f, kFs) == doctest::Approx(butterworth_oracle(f, 2500.0, order)).epsilon(1e-9));
    }
  }
}

TEST_CASE("chebyshev lowpass meets the analytic response") {
  for (std::size_t order : {3u, 4u, 8u}) {
    const auto d = dsp::design_lowpass(3000.0, FilterFamily::kChebyshev1, order, kFs, 0.5);
    for (double f : {0.0, 1000.0, 2500.0, 3000.0, 4000.0, 6000.0}) {
      const double got = dsp::magnitude_response(d.sections, f, kFs);
      CHECK(got == doctest::Approx(chebyshev_oracle(f, 3000.0, order, 0.5)).epsilon(1e-8));
    }
  }
}

TEST_CASE("lowpass argument errors") {
  CHECK_THROWS_AS(dsp::design_lowpass(0.0, FilterFamily::kButterworth, 4, kFs), std::invalid_argument);
  CHECK_THROWS_AS(dsp::design_lowpass(8000.0, FilterFamily::kButterworth, 4, kFs), std::invalid_argument);
  CHECK_THROWS_AS(dsp::design_lowpass(3000.0, FilterFamily::kButterworth, 0, kFs), std::invalid_argument);
  CHECK_THROWS_AS(dsp::design_lowpass(1e-12, FilterFamily::kButterworth, 8, kFs), std::runtime_error);
  CHECK_THROWS_AS(dsp::parse_filter_family("elliptic"), std::invalid_argument);
  CHECK(dsp::parse_filter_family("chebyshev1") == FilterFamily::kChebyshev1);
}

TEST_CASE("mix_at_snr hits the requested snr") {
  auto s = sine(500.0, 16000);
  auto n = sine(1300.0, 16000);
  CHECK(dsp::mix_at_snr(s, n, 0.0).gain == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dsp::mix_at_snr(s, n, 20.0).gain == doctest::Approx(0.1).epsilon(1e-12));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> snr_dist(-5.0, 30.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto speech = speech_shaped(4000, 100 + trial);
    AudioBuffer noise;
    noise.samples = testing::normal_vector(rng, 1500, 0.0, 3.0);
    const double snr = snr_dist(rng);
    const auto mix = dsp::mix_at_snr(speech, noise, snr, 77);
    std::vector<double> added(speech.size());
    for (std::size_t i = 0; i < added.size(); ++i) added[i] = mix.noisy.samples[i] - speech.samples[i];
    CHECK(std::abs(10.0 * std::log10(energy(speech.samples) / energy(added)) - snr) < 0.01);
  }

  AudioBuffer silent;
  silent.samples.assign(100, 0.0);
  CHECK_THROWS_AS(dsp::mix_at_snr(silent, n, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(dsp::mix_at_snr(s, silent, 10.0), std::invalid_argument);
  CHECK(dsp::mix_at_snr(s, n, INFINITY).noisy.samples == s.samples);
}

TEST_CASE("distort degenerates to pass-through") {
  AudioBuffer clean = sine(300.0, 8000, 0.5);
  for (std::size_t i = 0; i < clean.size(); ++i) clean.samples[i] += 0.2 * std::sin(2.0 * std::numbers::pi * 1700.0 * i / kFs);
  dsp::DistortionSpec spec;
  spec.rt60_s = 0.0;
  spec.cutoff_hz = 7999.0;
  spec.snr_db = INFINITY;
  const auto out = dsp::distort(clean, {}, spec);
  CHECK(testing::relative_error(std::vector<double>(out.y.samples.begin() + 200, out.y.samples.end()),
                                std::vector<double>(clean.samples.begin() + 200, clean.samples.end())) < 1e-2);
}

TEST_CASE("distort is reproducible from its manifest") {
  const auto clean = speech_shaped(8000, 21);
  const auto noise = speech_shaped(5000, 22);
  std::mt19937_64 rng(4);
  dsp::ManifestRecord rec{"in.wav", "out.wav", "noise.wav", dsp::sample_distortion_spec(rng)};
  CHECK_NOTHROW(rec.spec.validate(true));
  const auto first = dsp::distort(clean, noise, rec.spec);
  const auto replay = dsp::parse_manifest_line(dsp::to_json_line(rec));
  CHECK(replay.spec.snr_db == rec.spec.snr_db);
  CHECK(replay.spec.rir_seed == rec.spec.rir_seed);
  const auto second = dsp::distort(clean, noise, replay.spec);
  CHECK(first.y.samples == second.y.samples);

  rec.spec.snr_db = INFINITY;
  CHECK(std::isinf(dsp::parse_manifest_line(dsp::to_json_line(rec)).spec.snr_db));
  CHECK_THROWS_AS(rec.spec.validate(true), std::invalid_argument);
  CHECK_THROWS(dsp::parse_manifest_line("{\"input\": 1}"));
}

TEST_CASE("distort removes high-band energy") {
  const auto clean = speech_shaped(16000, 31);
  for (auto family : {FilterFamily::kButterworth, FilterFamily::kChebyshev1}) {
    for (double cutoff : {2000.0, 3000.0}) {
      dsp::DistortionSpec spec;
      spec.family = family;
      spec.cutoff_hz = cutoff;
      spec.snr_db = INFINITY;
      spec.rir_seed = 5;
      const auto out = dsp::distort(clean, {}, spec);
      const double reduction = 10.0 * std::log10(band_energy(clean, 4000.0) / band_energy(out.y, 4000.0));
      CHECK(reduction >= 20.0);
    }
  }
}

TEST_CASE("noise is added after the lowpass") {
  const std::size_t n = 16000;
  const auto speech = sine(500.0, n);
  auto noise = sine(6000.0, n);
  std::mt19937_64 rng(8);
  const auto hiss = testing::normal_vector(rng, n, 0.0, 0.01);
  for (std::size_t i = 0; i < n; ++i) noise.samples[i] += hiss[i];

  dsp::DistortionSpec spec;
  spec.rt60_s = 0.0;
  spec.cutoff_hz = 3000.0;
  spec.snr_db = 10.0;
  const auto out = dsp::distort(speech, noise, spec);
  CHECK(tone_amplitude(out.y.samples, 6000.0, 1000) == doctest::Approx(out.noise_gain).epsilon(0.02));

  auto marked = speech;
  for (std::size_t i = 0; i < n; ++i) marked.samples[i] += std::sin(2.0 * std::numbers::pi * 6000.0 * i / kFs);
  spec.snr_db = INFINITY;
  const auto filtered = dsp::distort(marked, {}, spec);
  CHECK(tone_amplitude(filtered.y.samples, 6000.0, 1000) < 0.01);
}

TEST_CASE("distort without noise is linear in the input") {
  const auto x = speech_shaped(6000, 41);
  AudioBuffer scaled = x;
  for (auto& v : scaled.samples) v *= 3.5;
  dsp::DistortionSpec spec;
  spec.snr_db = INFINITY;
  spec.rir_seed = 12;
  const auto a = dsp::distort(x, {}, spec);
  const auto b = dsp::distort(scaled, {}, spec);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(b.y.samples[i] - 3.5 * a.y.samples[i]));
  CHECK(worst < 1e-9);
}
