// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace flower::dsp {

/// Real-to-complex FFT of a fixed length n (n/2 + 1 output bins), backed by
/// FFTW. Plans are created under a process-wide lock; execution is
/// re-entrant, so one instance may be shared between threads.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  /// in: n samples, out: n/2 + 1 bins.
  void forward(std::span<const double> in, std::span<std::complex<double>> out) const;
  /// Unnormalized inverse: forward followed by inverse scales by n.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) const;

 private:
  struct Plans;
  std::size_t n_ = 0;
  std::unique_ptr<Plans> plans_;
};

/// Smallest m >= n whose only prime factors are 2, 3, 5 and 7.
std::size_t fast_fft_size(std::size_t n);

/// Full linear convolution (length a + b - 1) through one zero-padded FFT.
std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b);

}  // namespace flower::dsp
