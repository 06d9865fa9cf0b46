// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/guidance/context.hpp"

#include <random>
#include <stdexcept>
#include <string>

#include "flower/autodiff/ops.hpp"

namespace flower::guidance {

GuidanceContext sample_guidance(std::size_t rows, std::size_t dim, std::uint64_t seed, const Projections& projections,
                                GuidanceScaling scaling) {
  if (rows == 0 || dim == 0) throw std::invalid_argument("guidance needs rows and dim > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> values(rows * dim);
  for (auto& v : values) v = normal(rng);
  GuidanceContext ctx;
  ctx.z = ad::Tensor::from({rows, dim}, std::move(values));
  ctx.mode = GuidanceMode::kInfer;
  ctx.scaling = scaling;
  ctx.projections = projections;
  return ctx;
}

ad::Tensor inject(const ad::Tensor& hidden, const GuidanceContext& ctx, std::size_t site, const ad::Tensor& t) {
  if (site > 1) throw std::out_of_range("injection site must be 0 or 1");
  const ad::Linear& proj = ctx.projections[site];
  if (hidden.rank() != 2 || proj.out_features() != hidden.size(1) || ctx.z.rank() != 2 ||
      proj.in_features() != ctx.z.size(1) || (ctx.z.size(0) != hidden.size(0) && ctx.z.size(0) != 1)) {
    throw std::invalid_argument("shape mismatch in inject: hidden " + ad::shape_str(hidden.shape()) + " vs guidance " +
                                ad::shape_str(ctx.z.shape()) + " projected to " +
                                std::to_string(proj.out_features()));
  }
  if (t.numel() != hidden.size(0) && t.numel() != 1) {
    throw std::invalid_argument("shape mismatch in inject: hidden " + ad::shape_str(hidden.shape()) + " vs t " +
                                ad::shape_str(t.shape()));
  }
  std::vector<double> scales(t.numel());
  bool any = false;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    scales[i] = ctx.scale_at(t.at(i));
    any = any || scales[i] != 0.0;
  }
  if (!any) return hidden;
  ad::Tensor contribution = proj(ctx.z);
  if (ctx.scaling == GuidanceScaling::kTimeAdaptive) {
    const std::size_t n = scales.size();
    contribution = ad::mul(contribution, ad::Tensor::from({n, 1}, std::move(scales)));
  }
  return ad::add(hidden, contribution);
}

}  // namespace flower::guidance
