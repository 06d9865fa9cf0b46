// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "flower/autodiff/mlp.hpp"

namespace flower::ad {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments. Parameters without an accumulated
/// gradient are treated as having a zero gradient.
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, AdamOptions options = {});

  /// Applies one update from the current gradients. Throws naming the first
  /// parameter whose gradient is not finite; no parameter is touched then.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  void set_lr(double lr);

  const std::vector<double>& first_moment(std::size_t i) const { return m_.at(i); }
  const std::vector<double>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  std::vector<NamedTensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t steps_ = 0;
};

/// Plain gradient descent: p -= lr * grad.
void sgd_step(std::vector<NamedTensor>& params, double lr);

}  // namespace flower::ad
