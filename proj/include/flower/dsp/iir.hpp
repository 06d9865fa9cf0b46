// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flower/dsp/wav.hpp"

namespace flower::dsp {

enum class FilterFamily { kButterworth, kChebyshev1 };

FilterFamily parse_filter_family(const std::string& name);
std::string to_string(FilterFamily family);

/// b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2. First-order sections
/// have b2 = a2 = 0.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct LowpassDesign {
  std::vector<Biquad> sections;
  /// Digital poles, one per analog prototype pole.
  std::vector<std::complex<double>> poles;
};

/// Lowpass of the given order from the analog prototype through the
/// bilinear transform with the cutoff prewarped. Chebyshev-I uses
/// `ripple_db` passband ripple and, like the usual convention, has DC gain
/// -ripple_db for even orders and 0 dB for odd orders.
///
/// Throws std::invalid_argument unless 0 < cutoff_hz < sample_rate / 2 and
/// order >= 1; throws std::runtime_error if a pole lands on or outside the
/// unit circle.
LowpassDesign design_lowpass(double cutoff_hz, FilterFamily family, std::size_t order, double sample_rate,
                             double ripple_db = 0.5);

/// |H(e^{j 2 pi f / fs})| of the cascade.
double magnitude_response(const std::vector<Biquad>& sections, double freq_hz, double sample_rate);

/// Causal single pass through the cascade (transposed direct form II),
/// starting from rest.
std::vector<double> filter_cascade(const std::vector<Biquad>& sections, std::span<const double> x);

AudioBuffer lowpass(const AudioBuffer& audio, double cutoff_hz, FilterFamily family, std::size_t order,
                    double ripple_db = 0.5);

}  // namespace flower::dsp
