// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/flow/rq_spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "flower/autodiff/ops.hpp"

namespace flower::flow {

namespace {

// Forward-mode number carrying derivatives w.r.t. the seven local inputs of a
// spline bin: (x, x_k, w_k, y_k, h_k, d_k, d_k+1).
constexpr std::size_t kLocals = 7;

struct Dual {
  double v = 0.0;
  std::array<double, kLocals> d{};

  static Dual var(double value, std::size_t i) {
    Dual r{value, {}};
    r.d[i] = 1.0;
    return r;
  }
  static Dual constant(double value) { return Dual{value, {}}; }
};

Dual operator+(const Dual& a, const Dual& b) {
  Dual r{a.v + b.v, {}};
  for (std::size_t i = 0; i < kLocals; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
Dual operator-(const Dual& a, const Dual& b) {
  Dual r{a.v - b.v, {}};
  for (std::size_t i = 0; i < kLocals; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
Dual operator*(const Dual& a, const Dual& b) {
  Dual r{a.v * b.v, {}};
  for (std::size_t i = 0; i < kLocals; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
Dual operator/(const Dual& a, const Dual& b) {
  Dual r{a.v / b.v, {}};
  const double inv2 = 1.0 / (b.v * b.v);
  for (std::size_t i = 0; i < kLocals; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv2;
  return r;
}
Dual operator*(double s, const Dual& a) {
  Dual r{s * a.v, {}};
  for (std::size_t i = 0; i < kLocals; ++i) r.d[i] = s * a.d[i];
  return r;
}
Dual log(const Dual& a) {
  Dual r{std::log(a.v), {}};
  for (std::size_t i = 0; i < kLocals; ++i) r.d[i] = a.d[i] / a.v;
  return r;
}
inline double log(double v) { return std::log(v); }

// Rational-quadratic map inside one bin and its log slope.
template <class T>
std::pair<T, T> bin_forward(const T& x, const T& xk, const T& wk, const T& yk, const T& hk, const T& dk,
                            const T& dk1) {
  const T xi = (x - xk) / wk;
  const T s = hk / wk;
  const T one = T(1.0);
  const T xi1 = xi * (one - xi);
  const T num = hk * (s * xi * xi + dk * xi1);
  const T den = s + (dk1 + dk - 2.0 * s) * xi1;
  const T y = yk + num / den;
  const T slope_num = s * s * (dk1 * xi * xi + 2.0 * s * xi1 + dk * (one - xi) * (one - xi));
  const T log_slope = log(slope_num) - 2.0 * log(den);
  return {y, log_slope};
}

std::size_t locate(const std::vector<double>& knots, double v) {
  // Last knot index k with knots[k] <= v, clamped into [0, K-1].
  auto it = std::upper_bound(knots.begin(), knots.end(), v);
  std::size_t k = static_cast<std::size_t>(std::distance(knots.begin(), it));
  k = k == 0 ? 0 : k - 1;
  return std::min(k, knots.size() - 2);
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite spline parameter in ") + what);
  }
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::vector<double> softmax(const std::vector<double>& v) {
  const double peak = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += (out[i] = std::exp(v[i] - peak));
  for (auto& x : out) x /= total;
  return out;
}

}  // namespace

RqSplineParams RqSplineParams::identity(std::size_t bins, double bound) {
  RqSplineParams p;
  p.bin_count = bins;
  p.bound = bound;
  p.unnormalized_widths.assign(bins, 0.0);
  p.unnormalized_heights.assign(bins, 0.0);
  p.unnormalized_derivatives.assign(bins - 1, 0.0);
  return p;
}

double derivative_shift(const SplineLimits& limits) { return std::log(std::expm1(1.0 - limits.min_derivative)); }

SplineKnots normalize(const RqSplineParams& params, const SplineLimits& limits) {
  const std::size_t k = params.bin_count;
  if (k < 1 || params.unnormalized_widths.size() != k || params.unnormalized_heights.size() != k ||
      params.unnormalized_derivatives.size() != k - 1) {
    throw std::invalid_argument("spline parameter sizes do not match bin count " + std::to_string(k));
  }
  if (!(params.bound > 0.0)) throw std::invalid_argument("spline bound must be positive");
  check_finite(params.unnormalized_widths, "widths");
  check_finite(params.unnormalized_heights, "heights");
  check_finite(params.unnormalized_derivatives, "derivatives");
  if (limits.min_bin_width * static_cast<double>(k) >= 1.0 || limits.min_bin_height * static_cast<double>(k) >= 1.0) {
    throw std::invalid_argument("minimum bin size too large for bin count");
  }

  const double span = 2.0 * params.bound;
  SplineKnots knots;
  knots.bound = params.bound;
  auto cumulate = [&](const std::vector<double>& raw, double min_size) {
    const auto p = softmax(raw);
    std::vector<double> out{-params.bound};
    for (std::size_t i = 0; i < k; ++i) {
      out.push_back(out.back() + span * (min_size + (1.0 - min_size * static_cast<double>(k)) * p[i]));
    }
    return out;
  };
  knots.xs = cumulate(params.unnormalized_widths, limits.min_bin_width);
  knots.ys = cumulate(params.unnormalized_heights, limits.min_bin_height);
  const double shift = derivative_shift(limits);
  knots.derivatives.push_back(1.0);
  for (double u : params.unnormalized_derivatives) {
    knots.derivatives.push_back(limits.min_derivative + softplus(u + shift));
  }
  knots.derivatives.push_back(1.0);
  return knots;
}

SplinePoint rq_forward_scalar(double x, const SplineKnots& knots) {
  if (x < -knots.bound || x > knots.bound) return {x, 0.0};
  const std::size_t k = locate(knots.xs, x);
  auto [y, ls] = bin_forward<double>(x, knots.xs[k], knots.xs[k + 1] - knots.xs[k], knots.ys[k],
                                     knots.ys[k + 1] - knots.ys[k], knots.derivatives[k], knots.derivatives[k + 1]);
  return {y, ls};
}

SplinePoint rq_inverse_scalar(double y, const SplineKnots& knots) {
  if (y < -knots.bound || y > knots.bound) return {y, 0.0};
  const std::size_t k = locate(knots.ys, y);
  const double xk = knots.xs[k], wk = knots.xs[k + 1] - xk;
  const double yk = knots.ys[k], hk = knots.ys[k + 1] - yk;
  const double dk = knots.derivatives[k], dk1 = knots.derivatives[k + 1];
  const double s = hk / wk;
  const double dy = y - yk;
  const double a = hk * (s - dk) + dy * (dk1 + dk - 2.0 * s);
  const double b = hk * dk - dy * (dk1 + dk - 2.0 * s);
  const double c = -s * dy;
  const double disc = std::max(b * b - 4.0 * a * c, 0.0);
  // Pick the cancellation-free form of the in-bin root.
  const double root = std::sqrt(disc);
  const double xi = b >= 0.0 ? (2.0 * c) / (-b - root) : (-b + root) / (2.0 * a);
  double x = xk + std::clamp(xi, 0.0, 1.0) * wk;
  // One Newton step on the forward map removes the residual rounding error.
  auto [fx, ls] = bin_forward<double>(x, xk, wk, yk, hk, dk, dk1);
  x = std::clamp(x - (fx - y) / std::exp(ls), xk, xk + wk);
  ls = bin_forward<double>(x, xk, wk, yk, hk, dk, dk1).second;
  return {x, -ls};
}

SplineResult rq_spline_forward(std::span<const double> x, const RqSplineParams& params, const SplineLimits& limits) {
  const auto knots = normalize(params, limits);
  SplineResult out;
  out.values.reserve(x.size());
  for (double v : x) {
    auto p = rq_forward_scalar(v, knots);
    out.values.push_back(p.value);
    out.log_det += p.log_slope;
  }
  return out;
}

SplineResult rq_spline_inverse(std::span<const double> y, const RqSplineParams& params, const SplineLimits& limits) {
  const auto knots = normalize(params, limits);
  SplineResult out;
  out.values.reserve(y.size());
  for (double v : y) {
    auto p = rq_inverse_scalar(v, knots);
    out.values.push_back(p.value);
    out.log_det += p.log_slope;
  }
  return out;
}

NormalizedSplineTensors normalize_tensors(const ad::Tensor& raw_widths, const ad::Tensor& raw_heights,
                                          const ad::Tensor& raw_derivatives, double bound,
                                          const SplineLimits& limits) {
  const std::size_t n = raw_widths.size(0);
  const std::size_t k = raw_widths.size(1);
  const double span = 2.0 * bound;
  auto bins = [&](const ad::Tensor& raw, double min_size) {
    return ad::add_scalar(ad::scale(ad::softmax(raw), span * (1.0 - min_size * static_cast<double>(k))),
                          span * min_size);
  };
  NormalizedSplineTensors out;
  out.widths = bins(raw_widths, limits.min_bin_width);
  out.heights = bins(raw_heights, limits.min_bin_height);
  const ad::Tensor ones = ad::Tensor::full({n, 1}, 1.0);
  ad::Tensor interior =
      ad::add_scalar(ad::softplus(ad::add_scalar(raw_derivatives, derivative_shift(limits))), limits.min_derivative);
  out.derivatives = k > 1 ? ad::concat({ones, interior, ones}, 1) : ad::concat({ones, ones}, 1);
  return out;
}

SplineKnots knots_from_tensors(const NormalizedSplineTensors& params, std::size_t row, double bound) {
  const std::size_t k = params.widths.size(1);
  auto w = params.widths.data();
  auto h = params.heights.data();
  auto d = params.derivatives.data();
  SplineKnots knots;
  knots.bound = bound;
  knots.xs.push_back(-bound);
  knots.ys.push_back(-bound);
  for (std::size_t j = 0; j < k; ++j) {
    knots.xs.push_back(knots.xs.back() + w[row * k + j]);
    knots.ys.push_back(knots.ys.back() + h[row * k + j]);
  }
  knots.derivatives.assign(d.begin() + static_cast<std::ptrdiff_t>(row * (k + 1)),
                           d.begin() + static_cast<std::ptrdiff_t>((row + 1) * (k + 1)));
  return knots;
}

ad::Tensor rq_spline_op(const ad::Tensor& x, const NormalizedSplineTensors& params, double bound) {
  const std::size_t n = x.numel();
  const std::size_t k = params.widths.size(1);
  if (params.widths.size(0) != n || params.heights.size(0) != n || params.derivatives.size(0) != n ||
      params.heights.size(1) != k || params.derivatives.size(1) != k + 1) {
    throw std::invalid_argument("shape mismatch in rq_spline: x " + ad::shape_str(x.shape()) + " vs widths " +
                                ad::shape_str(params.widths.shape()));
  }
  auto xv = x.data();
  std::vector<double> out(2 * n);
  // Per element: bin index (or -1 outside the interval) and local partials of
  // (value, log slope) w.r.t. the seven bin inputs.
  struct Partials {
    long bin = -1;
    std::array<double, kLocals> dy{};
    std::array<double, kLocals> dl{};
  };
  std::vector<Partials> partials(n);
  SplineKnots knots;
  knots.bound = bound;
  knots.xs.resize(k + 1);
  knots.ys.resize(k + 1);
  knots.derivatives.resize(k + 1);
  auto wv = params.widths.data();
  auto hv = params.heights.data();
  auto dv = params.derivatives.data();
  for (std::size_t i = 0; i < n; ++i) {
    knots.xs[0] = knots.ys[0] = -bound;
    for (std::size_t j = 0; j < k; ++j) {
      knots.xs[j + 1] = knots.xs[j] + wv[i * k + j];
      knots.ys[j + 1] = knots.ys[j] + hv[i * k + j];
    }
    std::copy_n(dv.begin() + static_cast<std::ptrdiff_t>(i * (k + 1)), k + 1, knots.derivatives.begin());
    for (double v : knots.derivatives) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite spline parameter in derivatives");
    }
    const double xi = xv[i];
    if (!std::isfinite(xi) || xi < -bound || xi > bound) {
      out[2 * i] = xi;
      out[2 * i + 1] = 0.0;
      continue;
    }
    const std::size_t b = locate(knots.xs, xi);
    const auto [y, ls] = bin_forward<Dual>(
        Dual::var(xi, 0), Dual::var(knots.xs[b], 1), Dual::var(knots.xs[b + 1] - knots.xs[b], 2),
        Dual::var(knots.ys[b], 3), Dual::var(knots.ys[b + 1] - knots.ys[b], 4), Dual::var(knots.derivatives[b], 5),
        Dual::var(knots.derivatives[b + 1], 6));
    out[2 * i] = y.v;
    out[2 * i + 1] = ls.v;
    partials[i].bin = static_cast<long>(b);
    partials[i].dy = y.d;
    partials[i].dl = ls.d;
  }
  return ad::Tensor::make_result(
      {n, 2}, std::move(out), "rq_spline", {x, params.widths, params.heights, params.derivatives},
      [partials = std::move(partials), n, k](ad::detail::Node& self) {
        ad::detail::Node& px = *self.parents[0];
        ad::detail::Node& pw = *self.parents[1];
        ad::detail::Node& ph = *self.parents[2];
        ad::detail::Node& pd = *self.parents[3];
        for (std::size_t i = 0; i < n; ++i) {
          const double gy = self.grad[2 * i];
          const double gl = self.grad[2 * i + 1];
          const auto& p = partials[i];
          if (p.bin < 0) {
            if (px.requires_grad) px.grad_buffer()[i] += gy;
            continue;
          }
          std::array<double, kLocals> g{};
          for (std::size_t j = 0; j < kLocals; ++j) g[j] = gy * p.dy[j] + gl * p.dl[j];
          const std::size_t b = static_cast<std::size_t>(p.bin);
          if (px.requires_grad) px.grad_buffer()[i] += g[0];
          if (pw.requires_grad) {
            auto& gw = pw.grad_buffer();
            for (std::size_t j = 0; j < b; ++j) gw[i * k + j] += g[1];
            gw[i * k + b] += g[2];
          }
          if (ph.requires_grad) {
            auto& gh = ph.grad_buffer();
            for (std::size_t j = 0; j < b; ++j) gh[i * k + j] += g[3];
            gh[i * k + b] += g[4];
          }
          if (pd.requires_grad) {
            auto& gd = pd.grad_buffer();
            gd[i * (k + 1) + b] += g[5];
            gd[i * (k + 1) + b + 1] += g[6];
          }
        }
      });
}

}  // namespace flower::flow
