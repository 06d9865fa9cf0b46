// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flower/dsp/wav.hpp"

namespace flower::dsp {

/// Exponentially decaying Gaussian noise, r[k] = g[k] exp(-k 3 ln(10) /
/// (rt60 fs)), scaled to unit energy. rt60 = 0 yields a unit impulse.
AudioBuffer synthesize_rir(double rt60_s, double length_s, std::uint64_t seed,
                           std::uint32_t sample_rate = kSampleRate);

/// Schroeder energy decay curve in dB, normalized to 0 dB at the start.
std::vector<double> energy_decay_db(std::span<const double> rir);

/// RT60 from a least-squares line through the decay curve between -5 and
/// -25 dB (T20), extrapolated to 60 dB. Throws std::runtime_error if the
/// curve never reaches -25 dB.
double estimate_rt60(std::span<const double> rir, std::uint32_t sample_rate = kSampleRate);

/// (x * r) truncated to the length of x.
AudioBuffer reverberate(const AudioBuffer& x, const AudioBuffer& rir);

}  // namespace flower::dsp
