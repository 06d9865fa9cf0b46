// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/dsp/iir.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flower::dsp {

namespace {

using cd = std::complex<double>;

// Left-half-plane poles of the unit-cutoff prototype. Conjugate pairs are
// listed once (positive imaginary part) followed by the real pole, if any.
std::vector<cd> prototype_poles(FilterFamily family, std::size_t n, double ripple_db) {
  std::vector<cd> poles;
  const double nd = static_cast<double>(n);
  double sh = 1.0, ch = 1.0;
  if (family == FilterFamily::kChebyshev1) {
    if (!(ripple_db > 0.0)) throw std::invalid_argument("Chebyshev ripple must be positive");
    const double eps = std::sqrt(std::pow(10.0, ripple_db / 10.0) - 1.0);
    const double mu = std::asinh(1.0 / eps) / nd;
    sh = std::sinh(mu);
    ch = std::cosh(mu);
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double theta = std::numbers::pi * static_cast<double>(2 * k + 1) / (2.0 * nd);
    poles.emplace_back(-sh * std::sin(theta), ch * std::cos(theta));
  }
  if (n % 2 == 1) poles.emplace_back(-sh, 0.0);
  return poles;
}

double unit_dc_gain(const Biquad& s) { return (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2); }

}  // namespace

FilterFamily parse_filter_family(const std::string& name) {
  if (name == "butterworth") return FilterFamily::kButterworth;
  if (name == "chebyshev1" || name == "cheby1") return FilterFamily::kChebyshev1;
  throw std::invalid_argument("unknown filter family '" + name + "' (butterworth, chebyshev1)");
}

std::string to_string(FilterFamily family) {
  return family == FilterFamily::kButterworth ? "butterworth" : "chebyshev1";
}

LowpassDesign design_lowpass(double cutoff_hz, FilterFamily family, std::size_t order, double sample_rate,
                             double ripple_db) {
  if (order == 0) throw std::invalid_argument("filter order must be >= 1");
  if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0)) {
    throw std::invalid_argument("cutoff " + std::to_string(cutoff_hz) + " Hz must lie in (0, " +
                                std::to_string(sample_rate / 2.0) + ")");
  }
  const double k2 = 2.0 * sample_rate;
  const double warped = k2 * std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  LowpassDesign design;
  for (const cd& proto : prototype_poles(family, order, ripple_db)) {
    const cd s = proto * warped;
    const cd z = (k2 + s) / (k2 - s);
    Biquad q;
    if (proto.imag() != 0.0) {
      // (1 + z^-1)^2 / ((1 - z p^-1)(1 - z conj(p)^-1))
      q.b0 = 1.0;
      q.b1 = 2.0;
      q.b2 = 1.0;
      q.a1 = -2.0 * z.real();
      q.a2 = std::norm(z);
      design.poles.push_back(z);
      design.poles.push_back(std::conj(z));
    } else {
      q.b0 = 1.0;
      q.b1 = 1.0;
      q.a1 = -z.real();
      design.poles.push_back(z);
    }
    const double g = 1.0 / unit_dc_gain(q);
    q.b0 *= g;
    q.b1 *= g;
    q.b2 *= g;
    design.sections.push_back(q);
  }
  for (const cd& p : design.poles) {
    if (!(std::abs(p) < 1.0)) throw std::runtime_error("unstable lowpass design: pole magnitude " + std::to_string(std::abs(p)));
  }
  if (family == FilterFamily::kChebyshev1 && order % 2 == 0) {
    const double dc = std::pow(10.0, -ripple_db / 20.0);
    auto& s = design.sections.front();
    s.b0 *= dc;
    s.b1 *= dc;
    s.b2 *= dc;
  }
  return design;
}

double magnitude_response(const std::vector<Biquad>& sections, double freq_hz, double sample_rate) {
  const cd zi = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate);  // z^-1
  cd h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + zi * (s.b1 + zi * s.b2)) / (1.0 + zi * (s.a1 + zi * s.a2));
  return std::abs(h);
}

std::vector<double> filter_cascade(const std::vector<Biquad>& sections, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : sections) {
    double w1 = 0.0, w2 = 0.0;
    for (auto& v : y) {
      const double in = v;
      const double out = s.b0 * in + w1;
      w1 = s.b1 * in - s.a1 * out + w2;
      w2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

AudioBuffer lowpass(const AudioBuffer& audio, double cutoff_hz, FilterFamily family, std::size_t order,
                    double ripple_db) {
  const auto design = design_lowpass(cutoff_hz, family, order, audio.sample_rate, ripple_db);
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples = filter_cascade(design.sections, audio.samples);
  return out;
}

}  // namespace flower::dsp
