// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <random>

#include "flower/autodiff/tensor.hpp"
#include "flower/paths/field_network.hpp"

namespace flower::paths {

/// Variance-exploding SDE dx = g(t) dw with zero drift. Data sits at t = 0,
/// the prior N(0, sigma_hi^2 I) at t = 1.
struct SdeSpec {
  double sigma_lo = 0.01;
  double sigma_hi = 10.0;

  /// sigma_lo (sigma_hi / sigma_lo)^t
  double sigma(double t) const;
  /// sigma(t) sqrt(2 ln(sigma_hi / sigma_lo)), so that d sigma^2 / dt = g^2.
  double diffusion(double t) const;
  void validate() const;
};

/// x0 + sigma(t) noise. `t` is a scalar or one value per row ([B] or [B, 1]).
ad::Tensor sde_perturb(const ad::Tensor& x0, const ad::Tensor& t, const ad::Tensor& noise, const SdeSpec& spec);
ad::Tensor sde_perturb(const ad::Tensor& x0, double t, const ad::Tensor& noise, const SdeSpec& spec);

/// Per-row sigma(t) as a [B, 1] constant.
ad::Tensor sigma_column(const ad::Tensor& t, const SdeSpec& spec);

enum class ScoreWeighting {
  kNone,
  /// Multiplies each row's squared error by sigma(t)^2.
  kSigmaSquared,
};

/// Per-row draws for one score-matching step: t [B, 1] uniform on
/// [t_eps, 1] and noise [B, D] standard normal.
struct ScoreDraw {
  ad::Tensor t;
  ad::Tensor noise;
};

ScoreDraw draw_score_inputs(std::size_t rows, std::size_t dim, std::mt19937_64& rng, double t_eps = 1e-5);

/// mean over rows of w(t) ||pred - (-noise / sigma(t))||^2.
ad::Tensor score_loss_from_prediction(const ad::Tensor& pred, const ScoreDraw& draw, const SdeSpec& spec,
                                      ScoreWeighting weighting = ScoreWeighting::kNone);

/// Denoising score matching with the closed-form VE kernel. `score` maps
/// (x_t, t) to an estimate of grad log p_t(x_t | x0).
ad::Tensor score_matching_loss(const FieldFn& score, const ad::Tensor& x0, const ScoreDraw& draw, const SdeSpec& spec,
                               ScoreWeighting weighting = ScoreWeighting::kNone);
ad::Tensor score_matching_loss(const FieldFn& score, const ad::Tensor& x0, const SdeSpec& spec, std::mt19937_64& rng,
                               ScoreWeighting weighting = ScoreWeighting::kNone, double t_eps = 1e-5);

/// Reads a raw network output as a score: out / sigma(t), row-wise.
ad::Tensor score_from_output(const ad::Tensor& out, const ad::Tensor& t, const SdeSpec& spec);

}  // namespace flower::paths
