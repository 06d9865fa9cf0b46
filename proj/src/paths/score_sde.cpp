// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/paths/score_sde.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "flower/autodiff/ops.hpp"

namespace flower::paths {

namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("sde time " + std::to_string(t) + " is outside [0, 1]");
}

}  // namespace

double SdeSpec::sigma(double t) const { return sigma_lo * std::pow(sigma_hi / sigma_lo, t); }

double SdeSpec::diffusion(double t) const { return sigma(t) * std::sqrt(2.0 * std::log(sigma_hi / sigma_lo)); }

void SdeSpec::validate() const {
  if (!(sigma_lo > 0.0 && sigma_hi > sigma_lo && std::isfinite(sigma_hi))) {
    throw std::invalid_argument("sde needs 0 < sigma_lo < sigma_hi");
  }
}

ad::Tensor sigma_column(const ad::Tensor& t, const SdeSpec& spec) {
  std::vector<double> values(t.numel());
  for (std::size_t i = 0; i < values.size(); ++i) {
    check_time(t.at(i));
    values[i] = spec.sigma(t.at(i));
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw std::runtime_error("sigma(t) underflow at t = " + std::to_string(t.at(i)));
    }
  }
  const std::size_t n = values.size();
  return ad::Tensor::from({n, 1}, std::move(values));
}

ad::Tensor sde_perturb(const ad::Tensor& x0, const ad::Tensor& t, const ad::Tensor& noise, const SdeSpec& spec) {
  spec.validate();
  if (x0.shape() != noise.shape()) {
    throw std::invalid_argument("shape mismatch in sde_perturb: " + ad::shape_str(x0.shape()) + " vs " +
                                ad::shape_str(noise.shape()));
  }
  if (t.numel() == 1) {
    check_time(t.item());
    return ad::add(x0, ad::scale(noise, spec.sigma(t.item())));
  }
  if (x0.rank() != 2 || t.numel() != x0.size(0)) {
    throw std::invalid_argument("shape mismatch in sde_perturb: x0 " + ad::shape_str(x0.shape()) + " vs t " +
                                ad::shape_str(t.shape()));
  }
  return ad::add(x0, ad::mul(noise, sigma_column(t, spec)));
}

ad::Tensor sde_perturb(const ad::Tensor& x0, double t, const ad::Tensor& noise, const SdeSpec& spec) {
  return sde_perturb(x0, ad::Tensor::scalar(t), noise, spec);
}

ScoreDraw draw_score_inputs(std::size_t rows, std::size_t dim, std::mt19937_64& rng, double t_eps) {
  std::uniform_real_distribution<double> uniform(t_eps, 1.0);
  std::normal_distribution<double> normal;
  std::vector<double> t(rows);
  for (auto& v : t) v = uniform(rng);
  std::vector<double> noise(rows * dim);
  for (auto& v : noise) v = normal(rng);
  return {ad::Tensor::from({rows, 1}, std::move(t)), ad::Tensor::from({rows, dim}, std::move(noise))};
}

ad::Tensor score_loss_from_prediction(const ad::Tensor& pred, const ScoreDraw& draw, const SdeSpec& spec,
                                      ScoreWeighting weighting) {
  if (pred.shape() != draw.noise.shape()) {
    throw std::invalid_argument("shape mismatch in score loss: " + ad::shape_str(pred.shape()) + " vs " +
                                ad::shape_str(draw.noise.shape()));
  }
  const ad::Tensor sigma = sigma_column(draw.t, spec);
  const ad::Tensor target = ad::neg(ad::div(draw.noise, sigma));
  ad::Tensor residual = ad::sub(pred, target);
  if (weighting == ScoreWeighting::kSigmaSquared) residual = ad::mul(residual, sigma);
  return ad::scale(ad::sum(ad::square(residual)), 1.0 / static_cast<double>(pred.size(0)));
}

ad::Tensor score_matching_loss(const FieldFn& score, const ad::Tensor& x0, const ScoreDraw& draw, const SdeSpec& spec,
                               ScoreWeighting weighting) {
  const ad::Tensor x_t = sde_perturb(x0, draw.t, draw.noise, spec);
  return score_loss_from_prediction(score(x_t, draw.t), draw, spec, weighting);
}

ad::Tensor score_matching_loss(const FieldFn& score, const ad::Tensor& x0, const SdeSpec& spec, std::mt19937_64& rng,
                               ScoreWeighting weighting, double t_eps) {
  return score_matching_loss(score, x0, draw_score_inputs(x0.size(0), x0.size(1), rng, t_eps), spec, weighting);
}

ad::Tensor score_from_output(const ad::Tensor& out, const ad::Tensor& t, const SdeSpec& spec) {
  return ad::div(out, sigma_column(t, spec));
}

}  // namespace flower::paths
