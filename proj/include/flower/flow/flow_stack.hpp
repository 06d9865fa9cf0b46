// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <random>
#include <vector>

#include "flower/autodiff/mlp.hpp"
#include "flower/flow/rq_spline.hpp"

namespace flower::flow {

struct FlowConfig {
  std::size_t data_dim = 2;
  std::size_t cond_dim = 1;
  std::size_t blocks = 4;
  std::size_t hidden_width = 32;
  std::size_t hidden_layers = 2;
  std::size_t bins = 8;
  double bound = 3.0;
  SplineLimits limits{};
  // Dilations of the convolutional coefficient estimator this MLP stands in
  // for. Kept for configuration compatibility; not used by the MLP.
  std::vector<int> dilations{1, 3, 9};
};

/// Result of pushing a batch through the flow: latents [B, D] and the per-row
/// log |det dz/dx| [B].
struct FlowOutput {
  ad::Tensor z;
  ad::Tensor log_det;
};

/// One coupling layer. Columns of the identity half pass through unchanged and,
/// together with the condition, drive a spline on every column of the other
/// half. The two inputs are embedded separately and summed before the hidden
/// layers.
class CouplingBlock {
 public:
  CouplingBlock(const FlowConfig& config, std::size_t parity, std::mt19937_64& rng);

  FlowOutput forward(const ad::Tensor& x, const ad::Tensor& c) const;
  /// Exact inverse; no graph is recorded.
  ad::Tensor inverse(const ad::Tensor& z, const ad::Tensor& c) const;
  /// Inverse plus log |d x / d z| per row.
  FlowOutput inverse_with_log_det(const ad::Tensor& z, const ad::Tensor& c) const;

  const std::vector<std::size_t>& identity_columns() const { return identity_cols_; }
  const std::vector<std::size_t>& transform_columns() const { return transform_cols_; }

  /// Replaces the zero-initialized output layer with random weights of the
  /// given scale (tests use this to leave the identity map).
  void randomize_head(std::mt19937_64& rng, double scale);

  void collect(const std::string& prefix, std::vector<ad::NamedTensor>& out) const;

 private:
  NormalizedSplineTensors spline_params(const ad::Tensor& x_identity, const ad::Tensor& c) const;

  FlowConfig config_;
  std::vector<std::size_t> identity_cols_;
  std::vector<std::size_t> transform_cols_;
  bool has_identity_input_ = false;
  ad::Linear embed_x_;
  ad::Linear embed_c_;
  std::vector<ad::Linear> hidden_;
  ad::Linear head_;
};

/// Conditional normalizing flow: N coupling blocks with alternating even/odd
/// splits. Initialized to the identity map.
class FlowStack {
 public:
  FlowStack(FlowConfig config, std::mt19937_64& rng);

  FlowOutput forward(const ad::Tensor& x, const ad::Tensor& c) const;
  ad::Tensor inverse(const ad::Tensor& z, const ad::Tensor& c) const;
  /// Inverse plus log |d x / d z| per row; no gradient tracking.
  FlowOutput inverse_with_log_det(const ad::Tensor& z, const ad::Tensor& c) const;

  const FlowConfig& config() const { return config_; }
  std::vector<CouplingBlock>& blocks() { return blocks_; }
  std::vector<ad::NamedTensor> parameters(const std::string& prefix = "flow") const;

  /// Number of forward/inverse evaluations so far.
  std::size_t evaluation_count() const { return evaluations_->load(); }

 private:
  void check_inputs(const ad::Tensor& x, const ad::Tensor& c, const char* what) const;

  FlowConfig config_;
  std::vector<CouplingBlock> blocks_;
  std::unique_ptr<std::atomic<std::size_t>> evaluations_ = std::make_unique<std::atomic<std::size_t>>(0);
};

/// Standard-normal log density summed over each row: [B, D] -> [B].
ad::Tensor standard_normal_log_prob(const ad::Tensor& z);

struct NfLoss {
  /// -mean(log q(z) + log_det); differentiable.
  ad::Tensor nll;
  /// KL(p(z|c) || q(z)) surrogate: nll minus the data entropy H(x|c), which
  /// is a constant and taken as 0 here, so numerically equal to nll.
  double kl_term = 0.0;
  std::vector<double> log_det;
};

NfLoss nf_loss(const FlowStack& flow, const ad::Tensor& x, const ad::Tensor& c);
/// Same loss from an already computed forward pass.
NfLoss nf_loss(const FlowOutput& out);

}  // namespace flower::flow
