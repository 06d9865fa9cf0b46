// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/autodiff/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace flower::ad {

namespace {

void check_finite(const NamedTensor& p) {
  for (double g : p.tensor.grad()) {
    if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient in parameter '" + p.name + "'");
  }
}

void check_lr(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be positive");
}

}  // namespace

Adam::Adam(std::vector<NamedTensor> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  check_lr(options_.lr);
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::set_lr(double lr) {
  check_lr(lr);
  options_.lr = lr;
}

void Adam::step() {
  for (const auto& p : params_) check_finite(p);
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& param = params_[k].tensor;
    auto grad = param.grad();
    auto value = param.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void sgd_step(std::vector<NamedTensor>& params, double lr) {
  check_lr(lr);
  for (const auto& p : params) check_finite(p);
  for (auto& p : params) {
    auto grad = p.tensor.grad();
    auto value = p.tensor.mutable_data();
    for (std::size_t i = 0; i < grad.size(); ++i) value[i] -= lr * grad[i];
  }
}

}  // namespace flower::ad
