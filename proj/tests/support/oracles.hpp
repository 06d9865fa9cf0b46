// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

// Independent numerical oracles shared by the test suites. Nothing here calls
// into the autodiff engine's backward pass.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace flower::testing {

/// Central-difference gradient of a scalar function of a vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double step = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// ||a - b|| / max(||b||, floor)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), floor);
}

inline std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline std::vector<double> normal_vector(std::mt19937_64& rng, std::size_t n, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> dist(mean, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline double sample_mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

/// Determinant by Gaussian elimination with partial pivoting.
inline double determinant(std::vector<double> a, std::size_t n) {
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r * n + c]) > std::abs(a[pivot * n + c])) pivot = r;
    }
    if (a[pivot * n + c] == 0.0) return 0.0;
    if (pivot != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[pivot * n + k]);
      det = -det;
    }
    det *= a[c * n + c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
    }
  }
  return det;
}

/// KL(N(m0, S0) || N(m1, S1)) for 2-D Gaussians, closed form.
inline double gaussian_kl_2d(const double m0[2], const double s0[4], const double m1[2], const double s1[4]) {
  const double det0 = s0[0] * s0[3] - s0[1] * s0[2];
  const double det1 = s1[0] * s1[3] - s1[1] * s1[2];
  const double inv1[4] = {s1[3] / det1, -s1[1] / det1, -s1[2] / det1, s1[0] / det1};
  const double trace = inv1[0] * s0[0] + inv1[1] * s0[2] + inv1[2] * s0[1] + inv1[3] * s0[3];
  const double d[2] = {m1[0] - m0[0], m1[1] - m0[1]};
  const double quad = d[0] * (inv1[0] * d[0] + inv1[1] * d[1]) + d[1] * (inv1[2] * d[0] + inv1[3] * d[1]);
  return 0.5 * (trace + quad - 2.0 + std::log(det1 / det0));
}

}  // namespace flower::testing
