// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "flower/autodiff/tensor.hpp"
#include "flower/paths/field_network.hpp"
#include "flower/paths/score_sde.hpp"

namespace flower::paths {

struct SamplerConfig {
  std::size_t steps = 25;
  std::uint64_t seed = 0;
  /// When set, every state is appended as CSV rows: step,t,row,x0,x1,...
  std::string trajectory_csv;
};

/// Forward Euler over t = k/N, k = 0..N-1: x += field(x, k/N) / N.
/// Throws std::runtime_error naming the step if the state goes non-finite.
ad::Tensor euler_integrate(const FieldFn& field, const ad::Tensor& x0, std::size_t steps,
                           const std::string& trajectory_csv = "");

/// euler_integrate from x0 ~ N(0, I) [rows, dim] drawn with config.seed.
ad::Tensor euler_sample(const FieldFn& field, std::size_t rows, std::size_t dim, const SamplerConfig& config);

/// Euler-Maruyama for the reverse VE SDE from t = 1 to t = 0 with
/// x ~ N(0, sigma_hi^2 I) at the start. Step k (t = k/N, k = N..1):
/// x += g(t)^2 score(x, t) / N + g(t) sqrt(1/N) xi.
ad::Tensor reverse_sde_sample(const FieldFn& score, std::size_t rows, std::size_t dim, const SdeSpec& spec,
                              const SamplerConfig& config);

}  // namespace flower::paths
