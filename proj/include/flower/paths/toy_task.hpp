// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <string>

#include "flower/autodiff/tensor.hpp"

namespace flower::paths {

enum class ToyDistribution { kGaussian, kMixture, kTwoMoons };

ToyDistribution parse_toy_distribution(const std::string& name);
std::string to_string(ToyDistribution d);

/// Two-dimensional restoration problem: clean x from `distribution`, observed
/// y = A x + noise_std * eps.
struct ToyTaskConfig {
  ToyDistribution distribution = ToyDistribution::kMixture;
  std::array<double, 4> mixing{1.0, 0.5, 0.0, 0.3};  // A, row-major
  double noise_std = 0.2;
  /// kGaussian: mean and per-axis std.
  std::array<double, 2> mean{0.5, -0.5};
  std::array<double, 2> stddev{1.0, 0.5};
  /// kMixture: components evenly spaced on a circle.
  std::size_t components = 8;
  double radius = 2.0;
  double component_std = 0.2;
  /// kTwoMoons: isotropic jitter.
  double moon_noise = 0.1;
};

struct ToyBatch {
  ad::Tensor x;  // clean, [B, 2]
  ad::Tensor y;  // observed, [B, 2]
};

ToyBatch sample_toy(const ToyTaskConfig& config, std::size_t rows, std::mt19937_64& rng);

/// mean over rows of ||estimate - truth||^2.
double restoration_mse(const ad::Tensor& estimate, const ad::Tensor& truth);

}  // namespace flower::paths
