// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/autodiff/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "flower/autodiff/ops.hpp"

namespace flower::ad {

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return tanh(x);
    case Activation::kSoftplus:
      return softplus(x);
    case Activation::kIdentity:
      break;
  }
  return x;
}

Linear::Linear(std::size_t in, std::size_t out, bool bias, std::mt19937_64& rng)
    : in_(in), out_(out), has_bias_(bias) {
  // Glorot-uniform weights, zero bias.
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(in * out);
  for (auto& v : w) v = dist(rng);
  weight_ = Tensor::from({in, out}, std::move(w), true);
  if (bias) bias_ = Tensor::zeros({out}, true);
}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.rank() != 2 || x.size(1) != in_) {
    throw std::invalid_argument("shape mismatch in linear: input " + shape_str(x.shape()) + " vs weight " +
                                shape_str(weight_.shape()));
  }
  Tensor y = matmul(x, weight_);
  return has_bias_ ? add(y, bias_) : y;
}

void Linear::zero_init() {
  for (auto& v : weight_.mutable_data()) v = 0.0;
  if (has_bias_) {
    for (auto& v : bias_.mutable_data()) v = 0.0;
  }
}

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight_});
  if (has_bias_) out.push_back({prefix + ".bias", bias_});
}

Mlp::Mlp(const std::vector<std::size_t>& widths, const std::vector<Activation>& activations, std::mt19937_64& rng)
    : widths_(widths), activations_(activations) {
  if (widths.size() < 2 || activations.size() != widths.size() - 1) {
    throw std::invalid_argument("mlp needs n+1 widths for n activations");
  }
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers_.emplace_back(widths[i], widths[i + 1], true, rng);
}

Tensor Mlp::forward_range(const Tensor& x, std::size_t begin, std::size_t end) const {
  Tensor h = x;
  for (std::size_t i = begin; i < end; ++i) h = activate(layers_.at(i)(h), activations_[i]);
  return h;
}

void Mlp::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(prefix + ".l" + std::to_string(i), out);
}

std::vector<Tensor> tensors_of(const std::vector<NamedTensor>& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& n : named) out.push_back(n.tensor);
  return out;
}

}  // namespace flower::ad
