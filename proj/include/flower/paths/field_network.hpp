// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "flower/autodiff/mlp.hpp"
#include "flower/guidance/context.hpp"

namespace flower::paths {

inline constexpr std::size_t kTimeFeatures = 8;

/// [B, 1] times to [B, 8] features sin(pi 2^k t), cos(pi 2^k t), k = 0..3.
ad::Tensor time_embedding(const ad::Tensor& t);

/// A vector field (or score) evaluated on a batch: x_t [B, D], t [B, 1] -> [B, D].
using FieldFn = std::function<ad::Tensor(const ad::Tensor& x_t, const ad::Tensor& t)>;

/// t filled with one value for every row.
ad::Tensor time_column(std::size_t rows, double t);

struct FieldConfig {
  std::size_t data_dim = 2;
  std::size_t cond_dim = 2;
  std::size_t hidden_width = 64;
  /// At least 3: the trunk ends one layer before the two injection sites.
  std::size_t hidden_layers = 4;
  /// Width of the guidance latent; 0 builds a network without injection.
  std::size_t guidance_dim = 0;
};

/// Conditional field network. Input is concat(x_t, y, time_embedding(t)),
/// with y left out when cond_dim is 0.
/// The trunk produces c_latent, the hidden state right before the last two
/// hidden layers; the head runs those two layers, adding projected guidance
/// after each, and a linear output layer.
class FieldNetwork {
 public:
  FieldNetwork(const FieldConfig& config, std::mt19937_64& rng);

  ad::Tensor trunk(const ad::Tensor& x_t, const ad::Tensor& y, const ad::Tensor& t) const;
  ad::Tensor head(const ad::Tensor& c_latent, const ad::Tensor& t, const guidance::GuidanceContext* ctx) const;
  ad::Tensor operator()(const ad::Tensor& x_t, const ad::Tensor& y, const ad::Tensor& t,
                        const guidance::GuidanceContext* ctx = nullptr) const {
    return head(trunk(x_t, y, t), t, ctx);
  }

  const FieldConfig& config() const { return config_; }
  std::size_t latent_dim() const { return config_.hidden_width; }
  bool has_guidance() const { return config_.guidance_dim > 0; }
  const guidance::Projections& projections() const { return projections_; }

  std::vector<ad::NamedTensor> parameters(const std::string& prefix = "field") const;

 private:
  FieldConfig config_;
  ad::Mlp mlp_;
  std::size_t trunk_layers_ = 0;
  guidance::Projections projections_;
};

}  // namespace flower::paths
