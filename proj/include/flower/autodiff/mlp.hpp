// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "flower/autodiff/tensor.hpp"

namespace flower::ad {

enum class Activation { kIdentity, kTanh, kSoftplus };

Tensor activate(const Tensor& x, Activation act);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Affine map x @ W (+ b). W is [in, out]; b is [out].
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool bias, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  bool has_bias() const { return bias_.defined() && bias_.numel() > 0 && has_bias_; }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  const Tensor& weight() const { return weight_; }

  void zero_init();
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  bool has_bias_ = false;
  Tensor weight_;
  Tensor bias_;
};

class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, h1, ..., out}; activations has widths.size() - 1 entries.
  Mlp(const std::vector<std::size_t>& widths, const std::vector<Activation>& activations, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const { return forward_range(x, 0, layers_.size()); }
  /// Runs layers [begin, end), each followed by its activation.
  Tensor forward_range(const Tensor& x, std::size_t begin, std::size_t end) const;

  std::size_t layer_count() const { return layers_.size(); }
  const std::vector<std::size_t>& widths() const { return widths_; }
  Linear& layer(std::size_t i) { return layers_.at(i); }
  const Linear& layer(std::size_t i) const { return layers_.at(i); }
  Activation activation(std::size_t i) const { return activations_.at(i); }

  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<Activation> activations_;
  std::vector<Linear> layers_;
};

std::vector<Tensor> tensors_of(const std::vector<NamedTensor>& named);

}  // namespace flower::ad
