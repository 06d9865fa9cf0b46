// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/paths/field_network.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "flower/autodiff/ops.hpp"

namespace flower::paths {

ad::Tensor time_embedding(const ad::Tensor& t) {
  const std::size_t rows = t.numel();
  std::vector<double> values(rows * kTimeFeatures);
  for (std::size_t r = 0; r < rows; ++r) {
    double freq = std::numbers::pi;
    for (std::size_t k = 0; k < kTimeFeatures / 2; ++k, freq *= 2.0) {
      values[r * kTimeFeatures + 2 * k] = std::sin(freq * t.at(r));
      values[r * kTimeFeatures + 2 * k + 1] = std::cos(freq * t.at(r));
    }
  }
  return ad::Tensor::from({rows, kTimeFeatures}, std::move(values));
}

ad::Tensor time_column(std::size_t rows, double t) { return ad::Tensor::full({rows, 1}, t); }

FieldNetwork::FieldNetwork(const FieldConfig& config, std::mt19937_64& rng) : config_(config) {
  if (config.data_dim == 0 || config.hidden_width == 0) throw std::invalid_argument("field needs data_dim, width > 0");
  if (config.hidden_layers < 3) throw std::invalid_argument("field needs at least 3 hidden layers");
  std::vector<std::size_t> widths{config.data_dim + config.cond_dim + kTimeFeatures};
  std::vector<ad::Activation> acts;
  for (std::size_t i = 0; i < config.hidden_layers; ++i) {
    widths.push_back(config.hidden_width);
    acts.push_back(ad::Activation::kTanh);
  }
  widths.push_back(config.data_dim);
  acts.push_back(ad::Activation::kIdentity);
  mlp_ = ad::Mlp(widths, acts, rng);
  trunk_layers_ = config.hidden_layers - 2;
  if (config.guidance_dim > 0) {
    for (auto& p : projections_) p = ad::Linear(config.guidance_dim, config.hidden_width, false, rng);
  }
}

ad::Tensor FieldNetwork::trunk(const ad::Tensor& x_t, const ad::Tensor& y, const ad::Tensor& t) const {
  const bool has_y = config_.cond_dim > 0;
  if (x_t.rank() != 2 || x_t.size(1) != config_.data_dim || t.numel() != x_t.size(0) ||
      (has_y && (y.rank() != 2 || y.size(1) != config_.cond_dim || y.size(0) != x_t.size(0)))) {
    throw std::invalid_argument("shape mismatch in field network: x_t " + ad::shape_str(x_t.shape()) + " vs y " +
                                ad::shape_str(y.shape()) + " vs t " + ad::shape_str(t.shape()));
  }
  ad::Tensor input = has_y ? ad::concat({x_t, y, time_embedding(t)}, 1) : ad::concat({x_t, time_embedding(t)}, 1);
  return mlp_.forward_range(input, 0, trunk_layers_);
}

ad::Tensor FieldNetwork::head(const ad::Tensor& c_latent, const ad::Tensor& t,
                              const guidance::GuidanceContext* ctx) const {
  if (ctx != nullptr && !has_guidance()) throw std::invalid_argument("field network was built without guidance");
  ad::Tensor h = c_latent;
  for (std::size_t site = 0; site < 2; ++site) {
    h = mlp_.forward_range(h, trunk_layers_ + site, trunk_layers_ + site + 1);
    if (ctx != nullptr) h = guidance::inject(h, *ctx, site, t);
  }
  return mlp_.forward_range(h, trunk_layers_ + 2, mlp_.layer_count());
}

std::vector<ad::NamedTensor> FieldNetwork::parameters(const std::string& prefix) const {
  std::vector<ad::NamedTensor> out;
  mlp_.collect(prefix + ".mlp", out);
  if (has_guidance()) {
    projections_[0].collect(prefix + ".proj0", out);
    projections_[1].collect(prefix + ".proj1", out);
  }
  return out;
}

}  // namespace flower::paths
