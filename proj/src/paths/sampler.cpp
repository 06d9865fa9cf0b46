// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/paths/sampler.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include "flower/autodiff/ops.hpp"

namespace flower::paths {

namespace {

class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(const std::string& path) {
    if (path.empty()) return;
    out_.open(path);
    if (!out_) throw std::runtime_error("cannot open trajectory file " + path);
    out_.precision(17);
  }

  void write(std::size_t step, double t, const ad::Tensor& x) {
    if (!out_.is_open()) return;
    if (!header_) {
      out_ << "step,t,row";
      for (std::size_t j = 0; j < x.size(1); ++j) out_ << ",x" << j;
      out_ << '\n';
      header_ = true;
    }
    const std::size_t d = x.size(1);
    for (std::size_t r = 0; r < x.size(0); ++r) {
      out_ << step << ',' << t << ',' << r;
      for (std::size_t j = 0; j < d; ++j) out_ << ',' << x.at(r * d + j);
      out_ << '\n';
    }
  }

 private:
  std::ofstream out_;
  bool header_ = false;
};

void check_state(const std::vector<double>& x, std::size_t step) {
  for (double v : x) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite sampler state at step " + std::to_string(step));
  }
}

std::vector<double> standard_normal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> out(n);
  for (auto& v : out) v = normal(rng);
  return out;
}

}  // namespace

ad::Tensor euler_integrate(const FieldFn& field, const ad::Tensor& x0, std::size_t steps,
                           const std::string& trajectory_csv) {
  if (steps == 0) throw std::invalid_argument("sampler needs at least one step");
  if (x0.rank() != 2) throw std::invalid_argument("sampler state must be [B, D], got " + ad::shape_str(x0.shape()));
  ad::NoGradGuard no_grad;
  TrajectoryWriter trajectory(trajectory_csv);
  const double h = 1.0 / static_cast<double>(steps);
  const std::size_t rows = x0.size(0);
  std::vector<double> x(x0.data().begin(), x0.data().end());
  ad::Tensor state = ad::Tensor::from(x0.shape(), x);
  trajectory.write(0, 0.0, state);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const ad::Tensor v = field(state, time_column(rows, t));
    if (v.shape() != state.shape()) {
      throw std::invalid_argument("field returned " + ad::shape_str(v.shape()) + " for state " +
                                  ad::shape_str(state.shape()));
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h * v.at(i);
    check_state(x, k + 1);
    state = ad::Tensor::from(x0.shape(), x);
    trajectory.write(k + 1, static_cast<double>(k + 1) * h, state);
  }
  return state;
}

ad::Tensor euler_sample(const FieldFn& field, std::size_t rows, std::size_t dim, const SamplerConfig& config) {
  std::mt19937_64 rng(config.seed);
  const ad::Tensor x0 = ad::Tensor::from({rows, dim}, standard_normal(rows * dim, rng));
  return euler_integrate(field, x0, config.steps, config.trajectory_csv);
}

ad::Tensor reverse_sde_sample(const FieldFn& score, std::size_t rows, std::size_t dim, const SdeSpec& spec,
                              const SamplerConfig& config) {
  spec.validate();
  if (config.steps == 0) throw std::invalid_argument("sampler needs at least one step");
  ad::NoGradGuard no_grad;
  TrajectoryWriter trajectory(config.trajectory_csv);
  std::mt19937_64 rng(config.seed);
  std::vector<double> x = standard_normal(rows * dim, rng);
  for (auto& v : x) v *= spec.sigma_hi;
  const ad::Shape shape{rows, dim};
  ad::Tensor state = ad::Tensor::from(shape, x);
  trajectory.write(0, 1.0, state);
  const double h = 1.0 / static_cast<double>(config.steps);
  std::normal_distribution<double> normal;
  for (std::size_t k = config.steps; k >= 1; --k) {
    const double t = static_cast<double>(k) * h;
    const double g = spec.diffusion(t);
    const ad::Tensor s = score(state, time_column(rows, t));
    if (s.shape() != shape) {
      throw std::invalid_argument("score returned " + ad::shape_str(s.shape()) + " for state " + ad::shape_str(shape));
    }
    const double noise_scale = g * std::sqrt(h);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += g * g * h * s.at(i) + noise_scale * normal(rng);
    const std::size_t step = config.steps - k + 1;
    check_state(x, step);
    state = ad::Tensor::from(shape, x);
    trajectory.write(step, t - h, state);
  }
  return state;
}

}  // namespace flower::paths
