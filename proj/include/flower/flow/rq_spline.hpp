// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flower/autodiff/tensor.hpp"

namespace flower::flow {

/// Lower limits applied while normalizing raw spline parameters.
struct SplineLimits {
  double min_bin_width = 1e-3;
  double min_bin_height = 1e-3;
  double min_derivative = 1e-3;
};

/// Raw (unconstrained) parameters of a monotone rational-quadratic spline on
/// [-bound, bound], identity outside. Boundary knot slopes are fixed to 1, so
/// only the K-1 interior slopes are free.
struct RqSplineParams {
  std::size_t bin_count = 8;
  double bound = 3.0;
  std::vector<double> unnormalized_widths;       // K
  std::vector<double> unnormalized_heights;      // K
  std::vector<double> unnormalized_derivatives;  // K - 1

  /// All-zero raw parameters; normalizes to the identity map.
  static RqSplineParams identity(std::size_t bins, double bound);
};

/// Knot positions and slopes after normalization: K+1 entries each, with
/// xs.front() = ys.front() = -bound and xs.back() ~= ys.back() ~= bound.
struct SplineKnots {
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> derivatives;
  double bound = 0.0;
};

SplineKnots normalize(const RqSplineParams& params, const SplineLimits& limits = {});

/// Softplus offset that makes a zero raw derivative normalize to slope 1.
double derivative_shift(const SplineLimits& limits);

struct SplinePoint {
  double value;
  double log_slope;  // log |d out / d in|
};

SplinePoint rq_forward_scalar(double x, const SplineKnots& knots);
SplinePoint rq_inverse_scalar(double y, const SplineKnots& knots);

struct SplineResult {
  std::vector<double> values;
  double log_det = 0.0;
};

/// Applies one spline to every element of `x`. Throws on non-finite params.
SplineResult rq_spline_forward(std::span<const double> x, const RqSplineParams& params,
                               const SplineLimits& limits = {});
SplineResult rq_spline_inverse(std::span<const double> y, const RqSplineParams& params,
                               const SplineLimits& limits = {});

/// Differentiable normalization of batched raw parameters.
/// widths/heights: [N, K]; derivatives: [N, K-1]. Returns knot increments
/// ([N, K] widths and heights summing to 2*bound) and full slopes [N, K+1].
struct NormalizedSplineTensors {
  ad::Tensor widths;
  ad::Tensor heights;
  ad::Tensor derivatives;
};
NormalizedSplineTensors normalize_tensors(const ad::Tensor& raw_widths, const ad::Tensor& raw_heights,
                                          const ad::Tensor& raw_derivatives, double bound,
                                          const SplineLimits& limits = {});

/// Fused differentiable spline over N independent scalars, each with its own
/// normalized parameters. Returns [N, 2]: column 0 the transformed value,
/// column 1 the log slope.
ad::Tensor rq_spline_op(const ad::Tensor& x, const NormalizedSplineTensors& params, double bound);

/// Knots of row `row` of already-normalized tensors (for inversion).
SplineKnots knots_from_tensors(const NormalizedSplineTensors& params, std::size_t row, double bound);

}  // namespace flower::flow
