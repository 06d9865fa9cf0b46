// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

namespace flower::flow {

struct InformationEstimate {
  /// E_c KL(p(z|c) || N(0, I)) under a jointly Gaussian fit, in nats.
  double kl_estimate = 0.0;
  /// I(z; c) under the same fit, in nats.
  double mi_estimate = 0.0;
};

/// Gaussian plug-in estimates from jointly sampled rows z [n, dz] and
/// c [n, dc] (row-major). Both quantities share one joint covariance fit, so
/// kl_estimate - mi_estimate = KL(N(mean_z, cov_z) || N(0, I)) >= 0.
///
/// Throws std::runtime_error when the (jittered) joint covariance is not
/// positive definite, and std::logic_error if the bound
/// kl_estimate + 1e-6 >= mi_estimate is violated.
InformationEstimate mi_upper_bound_check(std::span<const double> z, std::size_t z_dim, std::span<const double> c,
                                         std::size_t c_dim, double jitter = 0.0);

}  // namespace flower::flow
