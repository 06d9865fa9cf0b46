// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/paths/toy_task.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flower::paths {

ToyDistribution parse_toy_distribution(const std::string& name) {
  if (name == "gaussian") return ToyDistribution::kGaussian;
  if (name == "mixture") return ToyDistribution::kMixture;
  if (name == "two_moons" || name == "moons") return ToyDistribution::kTwoMoons;
  throw std::invalid_argument("unknown toy distribution '" + name + "' (gaussian, mixture, two_moons)");
}

std::string to_string(ToyDistribution d) {
  switch (d) {
    case ToyDistribution::kGaussian:
      return "gaussian";
    case ToyDistribution::kMixture:
      return "mixture";
    case ToyDistribution::kTwoMoons:
      return "two_moons";
  }
  return "unknown";
}

ToyBatch sample_toy(const ToyTaskConfig& config, std::size_t rows, std::mt19937_64& rng) {
  if (rows == 0) throw std::invalid_argument("toy batch needs rows > 0");
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> x(rows * 2), y(rows * 2);
  for (std::size_t r = 0; r < rows; ++r) {
    double a = 0.0, b = 0.0;
    switch (config.distribution) {
      case ToyDistribution::kGaussian:
        a = config.mean[0] + config.stddev[0] * normal(rng);
        b = config.mean[1] + config.stddev[1] * normal(rng);
        break;
      case ToyDistribution::kMixture: {
        if (config.components == 0) throw std::invalid_argument("mixture needs components > 0");
        const auto k = static_cast<std::size_t>(uniform(rng) * static_cast<double>(config.components)) %
                       config.components;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(config.components);
        a = config.radius * std::cos(angle) + config.component_std * normal(rng);
        b = config.radius * std::sin(angle) + config.component_std * normal(rng);
        break;
      }
      case ToyDistribution::kTwoMoons: {
        const double s = std::numbers::pi * uniform(rng);
        if (uniform(rng) < 0.5) {
          a = std::cos(s);
          b = std::sin(s);
        } else {
          a = 1.0 - std::cos(s);
          b = 0.5 - std::sin(s);
        }
        a += config.moon_noise * normal(rng);
        b += config.moon_noise * normal(rng);
        break;
      }
    }
    x[2 * r] = a;
    x[2 * r + 1] = b;
    const auto& m = config.mixing;
    y[2 * r] = m[0] * a + m[1] * b + config.noise_std * normal(rng);
    y[2 * r + 1] = m[2] * a + m[3] * b + config.noise_std * normal(rng);
  }
  return {ad::Tensor::from({rows, 2}, std::move(x)), ad::Tensor::from({rows, 2}, std::move(y))};
}

double restoration_mse(const ad::Tensor& estimate, const ad::Tensor& truth) {
  if (estimate.shape() != truth.shape() || estimate.rank() != 2) {
    throw std::invalid_argument("shape mismatch in restoration_mse: " + ad::shape_str(estimate.shape()) + " vs " +
                                ad::shape_str(truth.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < estimate.numel(); ++i) {
    const double d = estimate.at(i) - truth.at(i);
    total += d * d;
  }
  return total / static_cast<double>(estimate.size(0));
}

}  // namespace flower::paths
