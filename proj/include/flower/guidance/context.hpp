// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "flower/autodiff/mlp.hpp"

namespace flower::guidance {

enum class GuidanceMode { kTrain, kInfer };
enum class GuidanceScaling { kConstant, kTimeAdaptive };

/// Bias-free maps from the guidance latent to each injection site's width.
using Projections = std::array<ad::Linear, 2>;

/// Gaussian guidance for one batch. `z` is [B, dim]; the projections are
/// shared handles onto the field network's parameters.
struct GuidanceContext {
  ad::Tensor z;
  GuidanceMode mode = GuidanceMode::kTrain;
  GuidanceScaling scaling = GuidanceScaling::kConstant;
  Projections projections;

  /// 1 for constant scaling, 1 - t for time-adaptive scaling.
  double scale_at(double t) const { return scaling == GuidanceScaling::kTimeAdaptive ? 1.0 - t : 1.0; }
  std::size_t dim() const { return z.rank() == 2 ? z.size(1) : 0; }
};

/// z ~ N(0, I) of shape [rows, dim] drawn from a generator seeded with `seed`.
GuidanceContext sample_guidance(std::size_t rows, std::size_t dim, std::uint64_t seed, const Projections& projections,
                                GuidanceScaling scaling = GuidanceScaling::kConstant);

/// hidden + scale(t) * projection_site(z). `t` is [B, 1] (or [1, 1]) and
/// hidden is [B, H]. When every row's scale is zero the input is returned as
/// is, so time-adaptive injection at t = 1 is bitwise the identity.
ad::Tensor inject(const ad::Tensor& hidden, const GuidanceContext& ctx, std::size_t site, const ad::Tensor& t);

}  // namespace flower::guidance
