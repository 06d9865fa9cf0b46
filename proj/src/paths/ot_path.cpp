// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/paths/ot_path.hpp"

#include <stdexcept>

#include "flower/autodiff/ops.hpp"

namespace flower::paths {

namespace {

void check_pair(const ad::Tensor& x0, const ad::Tensor& x1, const char* op) {
  if (x0.shape() != x1.shape()) {
    throw std::invalid_argument(std::string("shape mismatch in ") + op + ": " + ad::shape_str(x0.shape()) + " vs " +
                                ad::shape_str(x1.shape()));
  }
}

}  // namespace

void OtPathSpec::validate() const {
  if (!(sigma_min >= 0.0 && sigma_min < 1.0)) throw std::invalid_argument("sigma_min must lie in [0, 1)");
}

ad::Tensor ot_interpolate(const ad::Tensor& x0, const ad::Tensor& x1, const ad::Tensor& t, const OtPathSpec& spec) {
  check_pair(x0, x1, "ot_interpolate");
  if (t.numel() == 1) return ot_interpolate(x0, x1, t.item(), spec);
  if (x0.rank() != 2 || t.numel() != x0.size(0)) {
    throw std::invalid_argument("shape mismatch in ot_interpolate: x " + ad::shape_str(x0.shape()) + " vs t " +
                                ad::shape_str(t.shape()));
  }
  const ad::Tensor tc = ad::reshape(t, {t.numel(), 1});
  const ad::Tensor sigma_t = ad::add_scalar(ad::scale(tc, -(1.0 - spec.sigma_min)), 1.0);
  return ad::add(ad::mul(tc, x1), ad::mul(sigma_t, x0));
}

ad::Tensor ot_interpolate(const ad::Tensor& x0, const ad::Tensor& x1, double t, const OtPathSpec& spec) {
  check_pair(x0, x1, "ot_interpolate");
  return ad::add(ad::scale(x1, t), ad::scale(x0, 1.0 - (1.0 - spec.sigma_min) * t));
}

ad::Tensor ot_target_field(const ad::Tensor& x0, const ad::Tensor& x1, const OtPathSpec& spec) {
  check_pair(x0, x1, "ot_target_field");
  return ad::sub(x1, ad::scale(x0, 1.0 - spec.sigma_min));
}

FmDraw draw_fm_inputs(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> x0(rows * dim);
  for (auto& v : x0) v = normal(rng);
  std::vector<double> t(rows);
  for (auto& v : t) v = uniform(rng);
  return {ad::Tensor::from({rows, dim}, std::move(x0)), ad::Tensor::from({rows, 1}, std::move(t))};
}

ad::Tensor mean_squared_norm(const ad::Tensor& a) {
  return ad::scale(ad::sum(ad::square(a)), 1.0 / static_cast<double>(a.size(0)));
}

ad::Tensor fm_loss(const FieldFn& field, const ad::Tensor& x1, const FmDraw& draw, const OtPathSpec& spec) {
  spec.validate();
  const ad::Tensor x_t = ot_interpolate(draw.x0, x1, draw.t, spec);
  const ad::Tensor u = ot_target_field(draw.x0, x1, spec);
  return mean_squared_norm(ad::sub(field(x_t, draw.t), u));
}

ad::Tensor fm_loss(const FieldFn& field, const ad::Tensor& x1, const OtPathSpec& spec, std::mt19937_64& rng) {
  return fm_loss(field, x1, draw_fm_inputs(x1.size(0), x1.size(1), rng), spec);
}

}  // namespace flower::paths
