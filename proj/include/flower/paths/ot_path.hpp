// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <random>

#include "flower/autodiff/tensor.hpp"
#include "flower/paths/field_network.hpp"

namespace flower::paths {

/// Conditional optimal-transport path: prior x0 at t = 0, data x1 at t = 1,
/// mu_t = t x1, sigma_t = 1 - (1 - sigma_min) t.
struct OtPathSpec {
  double sigma_min = 1e-4;
  void validate() const;
};

/// t x1 + (1 - (1 - sigma_min) t) x0. `t` is a scalar or one value per row.
ad::Tensor ot_interpolate(const ad::Tensor& x0, const ad::Tensor& x1, const ad::Tensor& t, const OtPathSpec& spec);
ad::Tensor ot_interpolate(const ad::Tensor& x0, const ad::Tensor& x1, double t, const OtPathSpec& spec);

/// x1 - (1 - sigma_min) x0. Constant along the path, hence no t argument.
ad::Tensor ot_target_field(const ad::Tensor& x0, const ad::Tensor& x1, const OtPathSpec& spec);

/// Per-row draws for one flow-matching step: x0 [B, D] standard normal and
/// t [B, 1] uniform on [0, 1].
struct FmDraw {
  ad::Tensor x0;
  ad::Tensor t;
};

FmDraw draw_fm_inputs(std::size_t rows, std::size_t dim, std::mt19937_64& rng);

/// mean over rows of ||a||^2 (sum over columns).
ad::Tensor mean_squared_norm(const ad::Tensor& a);

/// mean over rows of ||field(x_t, t) - u||^2.
ad::Tensor fm_loss(const FieldFn& field, const ad::Tensor& x1, const FmDraw& draw, const OtPathSpec& spec);
ad::Tensor fm_loss(const FieldFn& field, const ad::Tensor& x1, const OtPathSpec& spec, std::mt19937_64& rng);

}  // namespace flower::paths
