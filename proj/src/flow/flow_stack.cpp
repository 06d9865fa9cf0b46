// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/flow/flow_stack.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "flower/autodiff/ops.hpp"

namespace flower::flow {

namespace {

ad::Tensor select_columns(const ad::Tensor& x, const std::vector<std::size_t>& cols) {
  std::vector<ad::Tensor> parts;
  parts.reserve(cols.size());
  for (auto c : cols) parts.push_back(ad::slice(x, 1, c, c + 1));
  return parts.size() == 1 ? parts[0] : ad::concat(parts, 1);
}

}  // namespace

CouplingBlock::CouplingBlock(const FlowConfig& config, std::size_t parity, std::mt19937_64& rng) : config_(config) {
  if (config.data_dim == 0 || config.bins == 0 || config.hidden_layers == 0) {
    throw std::invalid_argument("flow config needs data_dim, bins and hidden_layers > 0");
  }
  if (config.data_dim == 1) {
    transform_cols_ = {0};
  } else {
    for (std::size_t i = 0; i < config.data_dim; ++i) (i % 2 == parity ? identity_cols_ : transform_cols_).push_back(i);
  }
  has_identity_input_ = !identity_cols_.empty();
  const std::size_t width = config.hidden_width;
  if (has_identity_input_) embed_x_ = ad::Linear(identity_cols_.size(), width, true, rng);
  embed_c_ = ad::Linear(config.cond_dim, width, !has_identity_input_, rng);
  for (std::size_t i = 1; i < config.hidden_layers; ++i) hidden_.emplace_back(width, width, true, rng);
  head_ = ad::Linear(width, transform_cols_.size() * (3 * config.bins - 1), true, rng);
  head_.zero_init();
}

void CouplingBlock::randomize_head(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  for (auto& v : head_.weight().mutable_data()) v = dist(rng);
  for (auto& v : head_.bias().mutable_data()) v = dist(rng);
}

NormalizedSplineTensors CouplingBlock::spline_params(const ad::Tensor& x_identity, const ad::Tensor& c) const {
  ad::Tensor h = embed_c_(c);
  if (has_identity_input_) h = ad::add(embed_x_(x_identity), h);
  h = ad::tanh(h);
  for (const auto& layer : hidden_) h = ad::tanh(layer(h));
  ad::Tensor raw = head_(h);
  const std::size_t k = config_.bins;
  const std::size_t rows = x_identity.defined() && has_identity_input_ ? x_identity.size(0) : c.size(0);
  const std::size_t n = rows * transform_cols_.size();
  raw = ad::reshape(raw, {n, 3 * k - 1});
  ad::Tensor widths = ad::slice(raw, 1, 0, k);
  ad::Tensor heights = ad::slice(raw, 1, k, 2 * k);
  ad::Tensor derivs = k > 1 ? ad::slice(raw, 1, 2 * k, 3 * k - 1) : ad::Tensor::zeros({n, 1});
  return normalize_tensors(widths, heights, derivs, config_.bound, config_.limits);
}

FlowOutput CouplingBlock::forward(const ad::Tensor& x, const ad::Tensor& c) const {
  const std::size_t rows = x.size(0);
  const std::size_t t = transform_cols_.size();
  ad::Tensor x_id = has_identity_input_ ? select_columns(x, identity_cols_) : ad::Tensor();
  auto params = spline_params(x_id, c);
  ad::Tensor x_tr = ad::reshape(select_columns(x, transform_cols_), {rows * t});
  ad::Tensor out = rq_spline_op(x_tr, params, config_.bound);
  ad::Tensor y = ad::reshape(ad::slice(out, 1, 0, 1), {rows, t});
  ad::Tensor log_det = ad::sum(ad::reshape(ad::slice(out, 1, 1, 2), {rows, t}), 1);

  std::vector<ad::Tensor> columns(config_.data_dim);
  for (auto col : identity_cols_) columns[col] = ad::slice(x, 1, col, col + 1);
  for (std::size_t j = 0; j < t; ++j) columns[transform_cols_[j]] = ad::slice(y, 1, j, j + 1);
  ad::Tensor z = columns.size() == 1 ? columns[0] : ad::concat(columns, 1);
  return {z, log_det};
}

ad::Tensor CouplingBlock::inverse(const ad::Tensor& z, const ad::Tensor& c) const {
  return inverse_with_log_det(z, c).z;
}

FlowOutput CouplingBlock::inverse_with_log_det(const ad::Tensor& z, const ad::Tensor& c) const {
  ad::NoGradGuard no_grad;
  const std::size_t rows = z.size(0);
  const std::size_t d = config_.data_dim;
  const std::size_t t = transform_cols_.size();
  ad::Tensor z_id = has_identity_input_ ? select_columns(z, identity_cols_) : ad::Tensor();
  auto params = spline_params(z_id, c);
  std::vector<double> x(z.data().begin(), z.data().end());
  std::vector<double> log_det(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < t; ++j) {
      const auto knots = knots_from_tensors(params, r * t + j, config_.bound);
      double& v = x[r * d + transform_cols_[j]];
      const auto point = rq_inverse_scalar(v, knots);
      v = point.value;
      log_det[r] += point.log_slope;
    }
  }
  return {ad::Tensor::from(z.shape(), std::move(x)), ad::Tensor::from({rows}, std::move(log_det))};
}

void CouplingBlock::collect(const std::string& prefix, std::vector<ad::NamedTensor>& out) const {
  if (has_identity_input_) embed_x_.collect(prefix + ".embed_x", out);
  embed_c_.collect(prefix + ".embed_c", out);
  for (std::size_t i = 0; i < hidden_.size(); ++i) hidden_[i].collect(prefix + ".hidden" + std::to_string(i), out);
  head_.collect(prefix + ".head", out);
}

FlowStack::FlowStack(FlowConfig config, std::mt19937_64& rng) : config_(std::move(config)) {
  if (config_.blocks == 0) throw std::invalid_argument("flow needs at least one block");
  for (std::size_t i = 0; i < config_.blocks; ++i) blocks_.emplace_back(config_, i % 2, rng);
}

void FlowStack::check_inputs(const ad::Tensor& x, const ad::Tensor& c, const char* what) const {
  if (x.rank() != 2 || x.size(1) != config_.data_dim) {
    throw std::invalid_argument(std::string("dimension mismatch in flow ") + what + ": data " +
                                ad::shape_str(x.shape()) + ", expected [B," + std::to_string(config_.data_dim) + "]");
  }
  if (c.rank() != 2 || c.size(1) != config_.cond_dim || c.size(0) != x.size(0)) {
    throw std::invalid_argument(std::string("dimension mismatch in flow ") + what + ": condition " +
                                ad::shape_str(c.shape()) + ", expected [" + std::to_string(x.size(0)) + "," +
                                std::to_string(config_.cond_dim) + "]");
  }
}

FlowOutput FlowStack::forward(const ad::Tensor& x, const ad::Tensor& c) const {
  check_inputs(x, c, "forward");
  evaluations_->fetch_add(1);
  ad::Tensor z = x;
  ad::Tensor log_det;
  for (const auto& block : blocks_) {
    auto out = block.forward(z, c);
    z = out.z;
    log_det = log_det.defined() && log_det.numel() > 0 ? ad::add(log_det, out.log_det) : out.log_det;
  }
  return {z, log_det};
}

ad::Tensor FlowStack::inverse(const ad::Tensor& z, const ad::Tensor& c) const {
  check_inputs(z, c, "inverse");
  evaluations_->fetch_add(1);
  ad::Tensor x = z;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) x = it->inverse(x, c);
  return x;
}

FlowOutput FlowStack::inverse_with_log_det(const ad::Tensor& z, const ad::Tensor& c) const {
  check_inputs(z, c, "inverse");
  evaluations_->fetch_add(1);
  FlowOutput out{z, ad::Tensor::zeros({z.size(0)})};
  std::vector<double> total(z.size(0), 0.0);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    auto step = it->inverse_with_log_det(out.z, c);
    out.z = step.z;
    for (std::size_t r = 0; r < total.size(); ++r) total[r] += step.log_det.at(r);
  }
  out.log_det = ad::Tensor::from({z.size(0)}, std::move(total));
  return out;
}

std::vector<ad::NamedTensor> FlowStack::parameters(const std::string& prefix) const {
  std::vector<ad::NamedTensor> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
  return out;
}

ad::Tensor standard_normal_log_prob(const ad::Tensor& z) {
  const double d = static_cast<double>(z.size(1));
  ad::Tensor quad = ad::sum(ad::scale(ad::square(z), -0.5), 1);
  return ad::add_scalar(quad, -0.5 * d * std::log(2.0 * std::numbers::pi));
}

NfLoss nf_loss(const FlowStack& flow, const ad::Tensor& x, const ad::Tensor& c) {
  if (x.numel() == 0) throw std::invalid_argument("nf_loss needs a nonempty batch");
  return nf_loss(flow.forward(x, c));
}

NfLoss nf_loss(const FlowOutput& out) {
  NfLoss loss;
  loss.log_det.assign(out.log_det.data().begin(), out.log_det.data().end());
  for (double v : loss.log_det) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite flow log-det (degenerate spline bins)");
  }
  loss.nll = ad::neg(ad::mean(ad::add(standard_normal_log_prob(out.z), out.log_det)));
  loss.kl_term = loss.nll.item();
  return loss;
}

}  // namespace flower::flow
