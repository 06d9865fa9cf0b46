// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <algorithm>
#include <numeric>
#include <random>

#include "flower/autodiff/adam.hpp"
#include "flower/autodiff/ops.hpp"
#include "flower/flow/flow_stack.hpp"
#include "flower/flow/mutual_information.hpp"
#include "flower/flow/rq_spline.hpp"
#include "oracles.hpp"

using namespace flower;
using flow::FlowConfig;
using flow::FlowStack;
using flow::RqSplineParams;
using testing::normal_vector;
using testing::numeric_gradient;
using testing::relative_error;
using testing::uniform_vector;

namespace {

RqSplineParams random_params(std::mt19937_64& rng, std::size_t bins = 8, double bound = 3.0) {
  auto p = RqSplineParams::identity(bins, bound);
  p.unnormalized_widths = normal_vector(rng, bins, 0.0, 1.0);
  p.unnormalized_heights = normal_vector(rng, bins, 0.0, 1.0);
  p.unnormalized_derivatives = normal_vector(rng, bins - 1, 0.0, 1.0);
  return p;
}

FlowStack random_flow(std::size_t dim, std::size_t cond, std::mt19937_64& rng, double head_scale = 0.5) {
  FlowConfig cfg;
  cfg.data_dim = dim;
  cfg.cond_dim = cond;
  cfg.hidden_width = 16;
  FlowStack f(cfg, rng);
  for (auto& b : f.blocks()) b.randomize_head(rng, head_scale);
  return f;
}

}  // namespace

TEST_CASE("identity-initialized spline is the identity") {
  const auto p = RqSplineParams::identity(8, 3.0);
  const std::vector<double> x{-2.9, -1.0, 0.0, 0.4, 2.5};
  auto r = flow::rq_spline_forward(x, p);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(r.values[i] == doctest::Approx(x[i]).epsilon(1e-14));
  CHECK(std::abs(r.log_det) < 1e-12);
  auto inv = flow::rq_spline_inverse(x, p);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(inv.values[i] == doctest::Approx(x[i]).epsilon(1e-14));
}

TEST_CASE("spline tails are exactly the identity") {
  std::mt19937_64 rng(1);
  const auto p = random_params(rng);
  const std::vector<double> x{-7.5, -3.0000001, 3.0000001, 12.0};
  auto r = flow::rq_spline_forward(x, p);
  CHECK(r.values == x);
  CHECK(r.log_det == 0.0);
}

TEST_CASE("spline log-det matches the finite-difference slope") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_params(rng);
    const double x = std::uniform_real_distribution<double>(-2.95, 2.95)(rng);
    const double h = 1e-6;
    const double up = flow::rq_spline_forward(std::vector<double>{x + h}, p).values[0];
    const double down = flow::rq_spline_forward(std::vector<double>{x - h}, p).values[0];
    const double fd = std::log((up - down) / (2 * h));
    const double ld = flow::rq_spline_forward(std::vector<double>{x}, p).log_det;
    CHECK(std::abs(ld - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("spline is strictly increasing and inverts to 1e-8") {
  std::mt19937_64 rng(5);
  const auto p = random_params(rng);
  const auto x = uniform_vector(rng, 1000, -3.0, 3.0);
  auto fwd = flow::rq_spline_forward(x, p);
  auto inv = flow::rq_spline_inverse(fwd.values, p);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - inv.values[i]));
  CHECK(worst < 1e-8);
  CHECK(std::abs(fwd.log_det + inv.log_det) < 1e-10 * std::max(1.0, std::abs(fwd.log_det)));

  auto sorted = x;
  std::sort(sorted.begin(), sorted.end());
  auto ys = flow::rq_spline_forward(sorted, p).values;
  for (std::size_t i = 1; i < ys.size(); ++i) CHECK(ys[i] >= ys[i - 1]);
}

TEST_CASE("normalized knots honour the minimum sizes") {
  std::mt19937_64 rng(8);
  auto p = random_params(rng);
  p.unnormalized_widths[0] = 40.0;  // squeezes every other bin
  const auto k = flow::normalize(p);
  for (std::size_t i = 0; i + 1 < k.xs.size(); ++i) {
    CHECK(k.xs[i + 1] - k.xs[i] >= 6.0 * 1e-3 - 1e-12);
    CHECK(k.ys[i + 1] - k.ys[i] > 0.0);
  }
  CHECK(k.xs.back() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(k.ys.back() == doctest::Approx(3.0).epsilon(1e-12));
  for (double d : k.derivatives) CHECK(d > 0.0);
}

TEST_CASE("non-finite spline parameters are rejected") {
  auto p = RqSplineParams::identity(8, 3.0);
  p.unnormalized_heights[2] = std::nan("");
  CHECK_THROWS_AS(flow::rq_spline_forward(std::vector<double>{0.1}, p), std::invalid_argument);
  p = RqSplineParams::identity(8, 3.0);
  p.unnormalized_derivatives.pop_back();
  CHECK_THROWS_AS(flow::rq_spline_forward(std::vector<double>{0.1}, p), std::invalid_argument);
}

TEST_CASE("fused spline op agrees with the scalar path and with finite differences") {
  std::mt19937_64 rng(21);
  const std::size_t n = 6, k = 8;
  const double bound = 3.0;
  auto raw_w = normal_vector(rng, n * k);
  auto raw_h = normal_vector(rng, n * k);
  auto raw_d = normal_vector(rng, n * (k - 1));
  auto xs = uniform_vector(rng, n, -3.5, 3.5);

  auto evaluate = [&](const std::vector<double>& w, const std::vector<double>& h, const std::vector<double>& d,
                      const std::vector<double>& x, bool grad) {
    ad::Tensor tw = ad::Tensor::from({n, k}, w, grad);
    ad::Tensor th = ad::Tensor::from({n, k}, h, grad);
    ad::Tensor td = ad::Tensor::from({n, k - 1}, d, grad);
    ad::Tensor tx = ad::Tensor::from({n}, x, grad);
    auto norm = flow::normalize_tensors(tw, th, td, bound);
    ad::Tensor out = flow::rq_spline_op(tx, norm, bound);
    return std::tuple{out, tw, th, td, tx};
  };

  auto [out, tw, th, td, tx] = evaluate(raw_w, raw_h, raw_d, xs, false);
  for (std::size_t i = 0; i < n; ++i) {
    RqSplineParams p = RqSplineParams::identity(k, bound);
    p.unnormalized_widths.assign(raw_w.begin() + i * k, raw_w.begin() + (i + 1) * k);
    p.unnormalized_heights.assign(raw_h.begin() + i * k, raw_h.begin() + (i + 1) * k);
    p.unnormalized_derivatives.assign(raw_d.begin() + i * (k - 1), raw_d.begin() + (i + 1) * (k - 1));
    auto ref = flow::rq_spline_forward(std::vector<double>{xs[i]}, p);
    CHECK(out.at(2 * i) == doctest::Approx(ref.values[0]).epsilon(1e-12));
    CHECK(out.at(2 * i + 1) == doctest::Approx(ref.log_det).epsilon(1e-10));
  }

  // Scalar objective mixing both output columns.
  const auto mix = uniform_vector(rng, 2 * n, -1.0, 1.0);
  ad::Tensor weights = ad::Tensor::from({n, 2}, mix);
  auto objective = [&](const std::vector<double>& w, const std::vector<double>& h, const std::vector<double>& d,
                       const std::vector<double>& x) {
    auto [o, a, b, c, e] = evaluate(w, h, d, x, false);
    return ad::sum(ad::mul(o, weights)).item();
  };
  auto [o2, gw, gh, gd, gx] = evaluate(raw_w, raw_h, raw_d, xs, true);
  ad::sum(ad::mul(o2, weights)).backward();
  auto vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  CHECK(relative_error(vec(gw.grad()), numeric_gradient([&](const auto& v) { return objective(v, raw_h, raw_d, xs); },
                                                        raw_w)) < 1e-5);
  CHECK(relative_error(vec(gh.grad()), numeric_gradient([&](const auto& v) { return objective(raw_w, v, raw_d, xs); },
                                                        raw_h)) < 1e-5);
  CHECK(relative_error(vec(gd.grad()), numeric_gradient([&](const auto& v) { return objective(raw_w, raw_h, v, xs); },
                                                        raw_d)) < 1e-5);
  CHECK(relative_error(vec(gx.grad()), numeric_gradient([&](const auto& v) { return objective(raw_w, raw_h, raw_d, v); },
                                                        xs)) < 1e-5);
}

TEST_CASE("identity-initialized flow maps x to itself") {
  std::mt19937_64 rng(2);
  FlowConfig cfg;
  cfg.data_dim = 3;
  cfg.cond_dim = 4;
  FlowStack f(cfg, rng);
  ad::Tensor x = ad::Tensor::from({5, 3}, uniform_vector(rng, 15, -2, 2));
  ad::Tensor c = ad::Tensor::from({5, 4}, uniform_vector(rng, 20, -2, 2));
  auto out = f.forward(x, c);
  for (std::size_t i = 0; i < 15; ++i) CHECK(out.z.at(i) == doctest::Approx(x.at(i)).epsilon(1e-14));
  for (double v : out.log_det.data()) CHECK(std::abs(v) < 1e-12);
  auto back = f.inverse(x, c);
  for (std::size_t i = 0; i < 15; ++i) CHECK(back.at(i) == doctest::Approx(x.at(i)).epsilon(1e-14));
}

TEST_CASE("alternating splits transform every coordinate within two blocks") {
  std::mt19937_64 rng(2);
  FlowConfig cfg;
  cfg.data_dim = 4;
  FlowStack f(cfg, rng);
  CHECK(f.blocks()[0].transform_columns() == std::vector<std::size_t>{1, 3});
  CHECK(f.blocks()[1].transform_columns() == std::vector<std::size_t>{0, 2});
  CHECK(f.blocks().size() == 4);
}

TEST_CASE("flow round-trips 1000 random (x, c) pairs") {
  std::mt19937_64 rng(77);
  auto f = random_flow(2, 3, rng);
  ad::Tensor x = ad::Tensor::from({1000, 2}, uniform_vector(rng, 2000, -3.5, 3.5));
  ad::Tensor c = ad::Tensor::from({1000, 3}, normal_vector(rng, 3000));
  auto z = f.forward(x, c).z;
  auto back = f.inverse(z, c);
  double worst = 0.0;
  for (std::size_t i = 0; i < 2000; ++i) worst = std::max(worst, std::abs(back.at(i) - x.at(i)));
  CHECK(worst < 1e-6);

  const auto fwd = f.forward(x, c);
  const auto inv = f.inverse_with_log_det(fwd.z, c);
  double worst_ld = 0.0;
  for (std::size_t r = 0; r < 1000; ++r) {
    worst_ld = std::max(worst_ld, std::abs(fwd.log_det.at(r) + inv.log_det.at(r)));
    CHECK(inv.z.at(2 * r) == back.at(2 * r));
  }
  CHECK(worst_ld < 1e-10);
}

TEST_CASE("flow log-det equals the log-determinant of the numerical Jacobian") {
  std::mt19937_64 rng(31);
  for (std::size_t dim : {1u, 2u, 3u, 4u}) {
    auto f = random_flow(dim, 2, rng);
    for (int trial = 0; trial < 10; ++trial) {
      auto x0 = uniform_vector(rng, dim, -2.5, 2.5);
      ad::Tensor c = ad::Tensor::from({1, 2}, normal_vector(rng, 2));
      auto z_of = [&](const std::vector<double>& x) {
        auto z = f.forward(ad::Tensor::from({1, dim}, x), c).z;
        return std::vector<double>(z.data().begin(), z.data().end());
      };
      std::vector<double> jac(dim * dim);
      const double h = 1e-6;
      for (std::size_t j = 0; j < dim; ++j) {
        auto up = x0, down = x0;
        up[j] += h;
        down[j] -= h;
        auto zu = z_of(up), zd = z_of(down);
        for (std::size_t i = 0; i < dim; ++i) jac[i * dim + j] = (zu[i] - zd[i]) / (2 * h);
      }
      const double numeric = std::log(std::abs(testing::determinant(jac, dim)));
      const double analytic = f.forward(ad::Tensor::from({1, dim}, x0), c).log_det.item();
      CHECK(std::abs(analytic - numeric) <= 1e-3 * std::max(1.0, std::abs(numeric)));
    }
  }
}

TEST_CASE("flow rejects mismatched dimensions") {
  std::mt19937_64 rng(3);
  FlowConfig cfg;
  cfg.data_dim = 2;
  cfg.cond_dim = 3;
  FlowStack f(cfg, rng);
  CHECK_THROWS_AS(f.forward(ad::Tensor::zeros({4, 3}), ad::Tensor::zeros({4, 3})), std::invalid_argument);
  CHECK_THROWS_AS(f.forward(ad::Tensor::zeros({4, 2}), ad::Tensor::zeros({4, 2})), std::invalid_argument);
  CHECK_THROWS_AS(f.inverse(ad::Tensor::zeros({4, 2}), ad::Tensor::zeros({5, 3})), std::invalid_argument);
}

TEST_CASE("identity flow nll on standard normal data equals the Gaussian entropy") {
  std::mt19937_64 rng(4);
  FlowConfig cfg;
  cfg.data_dim = 2;
  FlowStack f(cfg, rng);
  ad::Tensor x = ad::Tensor::from({10000, 2}, normal_vector(rng, 20000));
  ad::Tensor c = ad::Tensor::zeros({10000, 1});
  auto loss = flow::nf_loss(f, x, c);
  const double per_dim = loss.nll.item() / 2.0;
  CHECK(std::abs(per_dim - 0.5 * (1.0 + std::log(2.0 * std::numbers::pi))) < 0.05);
  CHECK(loss.kl_term == loss.nll.item());
}

TEST_CASE("nf loss does not depend on batch order") {
  std::mt19937_64 rng(6);
  auto f = random_flow(2, 1, rng);
  auto xv = normal_vector(rng, 64);
  auto cv = normal_vector(rng, 32);
  const double a = flow::nf_loss(f, ad::Tensor::from({32, 2}, xv), ad::Tensor::from({32, 1}, cv)).nll.item();
  std::vector<std::size_t> perm(32);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> xp(64), cp(32);
  for (std::size_t i = 0; i < 32; ++i) {
    xp[2 * i] = xv[2 * perm[i]];
    xp[2 * i + 1] = xv[2 * perm[i] + 1];
    cp[i] = cv[perm[i]];
  }
  const double b = flow::nf_loss(f, ad::Tensor::from({32, 2}, xp), ad::Tensor::from({32, 1}, cp)).nll.item();
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("flow trained on a shifted Gaussian normalizes it") {
  std::mt19937_64 rng(123);
  FlowConfig cfg;
  cfg.data_dim = 2;
  cfg.cond_dim = 1;
  cfg.hidden_width = 16;
  FlowStack f(cfg, rng);
  const double mean[2] = {1.0, -0.5};
  const double sd[2] = {0.5, 0.8};
  auto draw = [&](std::size_t n) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      v[2 * i] = mean[0] + sd[0] * g(rng);
      v[2 * i + 1] = mean[1] + sd[1] * g(rng);
    }
    return v;
  };
  const std::size_t batch = 2048;
  ad::Tensor x_train = ad::Tensor::from({batch, 2}, draw(batch));
  ad::Tensor c_train = ad::Tensor::full({batch, 1}, 1.0);
  ad::Adam opt(f.parameters(), {.lr = 1e-3});
  std::vector<double> history;
  for (int step = 0; step < 600; ++step) {
    opt.zero_grad();
    auto loss = flow::nf_loss(f, x_train, c_train);
    loss.nll.backward();
    opt.step();
    history.push_back(loss.nll.item());
  }
  // Trend: 10-step moving averages never increase.
  std::vector<double> ma;
  for (std::size_t i = 10; i <= history.size(); i += 10) {
    double s = 0;
    for (std::size_t j = i - 10; j < i; ++j) s += history[j];
    ma.push_back(s / 10);
  }
  for (std::size_t i = 1; i < ma.size(); ++i) CHECK(ma[i] <= ma[i - 1] + 1e-9);

  const std::size_t n = 5000;
  ad::Tensor x_test = ad::Tensor::from({n, 2}, draw(n));
  ad::Tensor c_test = ad::Tensor::full({n, 1}, 1.0);
  ad::Tensor z;
  {
    ad::NoGradGuard ng;
    z = f.forward(x_test, c_test).z;
  }
  for (std::size_t d = 0; d < 2; ++d) {
    std::vector<double> col;
    for (std::size_t i = 0; i < n; ++i) col.push_back(z.at(2 * i + d));
    CHECK(std::abs(testing::sample_mean(col)) < 0.1);
    const double var = testing::sample_variance(col);
    CHECK(var > 0.8);
    CHECK(var < 1.2);
  }

  // Generated samples against the target Gaussian.
  ad::Tensor gen = f.inverse(ad::Tensor::from({n, 2}, normal_vector(rng, 2 * n)), c_test);
  double m[2] = {0, 0}, s[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    m[0] += gen.at(2 * i) / n;
    m[1] += gen.at(2 * i + 1) / n;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double a = gen.at(2 * i) - m[0], b = gen.at(2 * i + 1) - m[1];
    s[0] += a * a / n;
    s[1] += a * b / n;
    s[2] += a * b / n;
    s[3] += b * b / n;
  }
  const double target_s[4] = {sd[0] * sd[0], 0, 0, sd[1] * sd[1]};
  CHECK(testing::gaussian_kl_2d(m, s, mean, target_s) < 0.1);
}

TEST_CASE("Gaussian plug-in information estimates") {
  std::mt19937_64 rng(9);
  const std::size_t n = 20000;
  auto correlated = [&](double rho) {
    std::vector<double> z(n), c(n);
    std::normal_distribution<double> g;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = g(rng), b = g(rng);
      z[i] = a;
      c[i] = rho * a + std::sqrt(1 - rho * rho) * b;
    }
    return std::pair{z, c};
  };

  SUBCASE("independent variables carry no information") {
    auto [z, c] = correlated(0.0);
    auto est = flow::mi_upper_bound_check(z, 1, c, 1);
    CHECK(est.mi_estimate < 0.05);
    CHECK(est.kl_estimate + 1e-6 >= est.mi_estimate);
  }
  SUBCASE("rho = 0.5 matches -1/2 log(1 - rho^2)") {
    auto [z, c] = correlated(0.5);
    auto est = flow::mi_upper_bound_check(z, 1, c, 1);
    CHECK(std::abs(est.mi_estimate - (-0.5 * std::log(1 - 0.25))) < 0.03);
    CHECK(est.kl_estimate + 1e-6 >= est.mi_estimate);
  }
  SUBCASE("rho = 0.99: large information, bound still holds") {
    auto [z, c] = correlated(0.99);
    auto est = flow::mi_upper_bound_check(z, 1, c, 1);
    const double analytic = -0.5 * std::log(1 - 0.99 * 0.99);
    CHECK(std::abs(est.mi_estimate - analytic) < 0.05);
    CHECK(est.kl_estimate + 1e-6 >= est.mi_estimate);
  }
  SUBCASE("identical variables need jitter") {
    auto [z, c] = correlated(0.0);
    CHECK_THROWS_AS(flow::mi_upper_bound_check(z, 1, z, 1), std::runtime_error);
    auto est = flow::mi_upper_bound_check(z, 1, z, 1, 1e-4);
    CHECK(est.mi_estimate > 3.0);
    CHECK(est.kl_estimate + 1e-6 >= est.mi_estimate);
  }
}
