// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "flower/autodiff/ops.hpp"
#include "flower/flow/flow_stack.hpp"
#include "flower/guidance/context.hpp"
#include "flower/guidance/joint.hpp"
#include "flower/paths/sampler.hpp"
#include "flower/paths/toy_task.hpp"
#include "oracles.hpp"

using namespace flower;
using guidance::GuidanceContext;
using guidance::GuidanceScaling;
using testing::normal_vector;
using testing::sample_mean;
using testing::sample_variance;

namespace {

std::vector<double> values(const ad::Tensor& t) { return {t.data().begin(), t.data().end()}; }

bool bitwise_equal(const ad::Tensor& a, const ad::Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

guidance::Projections make_projections(std::size_t dim, std::size_t width, std::mt19937_64& rng) {
  return {ad::Linear(dim, width, false, rng), ad::Linear(dim, width, false, rng)};
}

struct Models {
  paths::FieldNetwork field;
  flow::FlowStack flow;
};

Models make_models(std::uint64_t seed, std::size_t width = 16) {
  std::mt19937_64 rng(seed);
  paths::FieldConfig fc;
  fc.hidden_width = width;
  fc.guidance_dim = 2;
  paths::FieldNetwork field(fc, rng);
  flow::FlowConfig flc;
  flc.cond_dim = field.latent_dim();
  flc.hidden_width = 8;
  flow::FlowStack flow(flc, rng);
  return {std::move(field), std::move(flow)};
}

}  // namespace

TEST_CASE("sampled guidance is seeded standard normal") {
  std::mt19937_64 rng(1);
  auto proj = make_projections(3, 4, rng);
  auto a = guidance::sample_guidance(10, 3, 77, proj);
  auto b = guidance::sample_guidance(10, 3, 77, proj);
  auto c = guidance::sample_guidance(10, 3, 78, proj);
  CHECK(a.mode == guidance::GuidanceMode::kInfer);
  CHECK(a.dim() == 3);
  CHECK(values(a.z) == values(b.z));
  CHECK(values(a.z) != values(c.z));

  auto big = guidance::sample_guidance(100000, 2, 5, proj);
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> col;
    for (std::size_t r = 0; r < 100000; ++r) col.push_back(big.z.at(r * 2 + j));
    CHECK(std::abs(sample_mean(col)) < 0.01);
    CHECK(std::abs(sample_variance(col) - 1.0) < 0.02);
  }
}

TEST_CASE("time-adaptive injection vanishes at t = 1 and matches constant mode at t = 0") {
  std::mt19937_64 rng(2);
  auto proj = make_projections(2, 5, rng);
  auto hidden = ad::Tensor::from({4, 5}, normal_vector(rng, 20));
  hidden.mutable_data()[3] = -0.0;
  auto adaptive = guidance::sample_guidance(4, 2, 9, proj, GuidanceScaling::kTimeAdaptive);
  auto constant = guidance::sample_guidance(4, 2, 9, proj, GuidanceScaling::kConstant);

  auto at_one = guidance::inject(hidden, adaptive, 0, ad::Tensor::full({4, 1}, 1.0));
  CHECK(bitwise_equal(at_one, hidden));
  for (std::size_t site : {0u, 1u}) {
    auto a = guidance::inject(hidden, adaptive, site, ad::Tensor::full({4, 1}, 0.0));
    auto c = guidance::inject(hidden, constant, site, ad::Tensor::full({4, 1}, 0.7));
    CHECK(bitwise_equal(a, c));
    CHECK(!bitwise_equal(a, hidden));
  }
  // Per-row scale 1 - t.
  auto half = guidance::inject(hidden, adaptive, 1, ad::Tensor::from({4, 1}, {0.0, 0.5, 1.0, 0.25}));
  auto full = guidance::inject(hidden, constant, 1, ad::Tensor::full({4, 1}, 0.0));
  const double scales[4] = {1.0, 0.5, 0.0, 0.75};
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t j = 0; j < 5; ++j) {
      const double added = full.at(r * 5 + j) - hidden.at(r * 5 + j);
      CHECK(half.at(r * 5 + j) - hidden.at(r * 5 + j) == doctest::Approx(scales[r] * added).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero guidance injects nothing in either mode") {
  std::mt19937_64 rng(3);
  auto proj = make_projections(2, 5, rng);
  auto hidden = ad::Tensor::from({3, 5}, normal_vector(rng, 15));
  for (auto scaling : {GuidanceScaling::kConstant, GuidanceScaling::kTimeAdaptive}) {
    GuidanceContext ctx{ad::Tensor::zeros({3, 2}), guidance::GuidanceMode::kInfer, scaling, proj};
    for (double t : {0.0, 0.3}) CHECK(values(guidance::inject(hidden, ctx, 0, ad::Tensor::full({3, 1}, t))) == values(hidden));
  }
}

TEST_CASE("inject rejects mismatched shapes") {
  std::mt19937_64 rng(4);
  auto proj = make_projections(2, 5, rng);
  auto ctx = guidance::sample_guidance(3, 2, 1, proj);
  CHECK_THROWS_AS(guidance::inject(ad::Tensor::zeros({3, 4}), ctx, 0, ad::Tensor::full({3, 1}, 0.5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(guidance::inject(ad::Tensor::zeros({2, 5}), ctx, 0, ad::Tensor::full({2, 1}, 0.5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(guidance::inject(ad::Tensor::zeros({3, 5}), ctx, 2, ad::Tensor::full({3, 1}, 0.5)),
                  std::out_of_range);
  try {
    guidance::inject(ad::Tensor::zeros({3, 4}), ctx, 0, ad::Tensor::full({3, 1}, 0.5));
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("[3,4]") != std::string::npos);
    CHECK(std::string(e.what()).find("[3,2]") != std::string::npos);
  }
}

TEST_CASE("identity-initialized flow extracts z = x_clean") {
  auto m = make_models(5);
  std::mt19937_64 rng(6);
  auto x = ad::Tensor::from({8, 2}, normal_vector(rng, 16));
  auto c = ad::Tensor::from({8, m.field.latent_dim()}, normal_vector(rng, 8 * m.field.latent_dim()));
  auto ctx = guidance::extract_guidance(m.flow, x, c, m.field.projections());
  CHECK(ctx.mode == guidance::GuidanceMode::kTrain);
  for (std::size_t i = 0; i < 16; ++i) CHECK(ctx.z.at(i) == doctest::Approx(x.at(i)).epsilon(1e-12));
  CHECK_THROWS_AS(guidance::extract_guidance(m.flow, x, ad::Tensor::zeros({8, 3}), m.field.projections()),
                  std::invalid_argument);
}

TEST_CASE("joint loss total is the exact sum of its parts in both frameworks") {
  auto m = make_models(7);
  paths::ToyTaskConfig task;
  std::mt19937_64 rng(8);
  auto batch = paths::sample_toy(task, 32, rng);
  for (auto fw : {guidance::Framework::kFlowMatching, guidance::Framework::kScore}) {
    guidance::JointOptions opts;
    opts.path.framework = fw;
    auto loss = guidance::joint_loss(m.field, m.flow, batch.x, batch.y, opts, rng);
    CHECK(loss.total.item() == loss.l_unet.item() + loss.l_nf.item());
    CHECK(std::isfinite(loss.l_nf.item()));
    CHECK(loss.l_unet.item() >= 0.0);
  }
}

TEST_CASE("detaching c_latent cuts the NF loss gradient into the field network") {
  paths::ToyTaskConfig task;
  std::mt19937_64 data(9);
  auto batch = paths::sample_toy(task, 32, data);
  for (bool detach : {false, true}) {
    auto m = make_models(10);
    // Leave the identity map so the flow depends on c.
    std::mt19937_64 head_rng(11);
    for (auto& block : m.flow.blocks()) block.randomize_head(head_rng, 0.3);
    guidance::JointOptions opts;
    opts.detach_latent = detach;
    std::mt19937_64 rng(12);
    auto loss = guidance::joint_loss(m.field, m.flow, batch.x, batch.y, opts, rng);
    loss.l_nf.backward();
    double field_grad = 0.0, flow_grad = 0.0;
    for (auto& p : m.field.parameters()) {
      for (double g : p.tensor.grad()) field_grad += std::abs(g);
    }
    for (auto& p : m.flow.parameters()) {
      for (double g : p.tensor.grad()) flow_grad += std::abs(g);
    }
    CHECK(flow_grad > 0.0);
    if (detach) {
      CHECK(field_grad == 0.0);
    } else {
      CHECK(field_grad > 0.0);
    }
  }
}

TEST_CASE("inference never evaluates the flow") {
  auto m = make_models(13);
  paths::ToyTaskConfig task;
  std::mt19937_64 rng(14);
  auto batch = paths::sample_toy(task, 16, rng);
  guidance::JointOptions opts;
  guidance::joint_loss(m.field, m.flow, batch.x, batch.y, opts, rng);
  const std::size_t before = m.flow.evaluation_count();
  CHECK(before == 1);
  for (bool resample : {false, true}) {
    auto field = guidance::bind_sampled_guidance(m.field, batch.y, opts.path, GuidanceScaling::kTimeAdaptive, 3,
                                                 resample);
    paths::euler_sample(field, 16, 2, {.steps = 5, .seed = 1});
  }
  opts.path.framework = guidance::Framework::kScore;
  auto score = guidance::bind_sampled_guidance(m.field, batch.y, opts.path, GuidanceScaling::kConstant, 3);
  paths::reverse_sde_sample(score, 16, 2, opts.path.sde, {.steps = 5, .seed = 1});
  CHECK(m.flow.evaluation_count() == before);
}

TEST_CASE("guided sampling is deterministic with fixed and per-step guidance") {
  auto m = make_models(15);
  paths::ToyTaskConfig task;
  std::mt19937_64 rng(16);
  auto y = paths::sample_toy(task, 12, rng).y;
  guidance::PathSpec path;
  auto run = [&](bool resample, std::uint64_t seed) {
    auto field = guidance::bind_sampled_guidance(m.field, y, path, GuidanceScaling::kConstant, seed, resample);
    return values(paths::euler_sample(field, 12, 2, {.steps = 8, .seed = 2}));
  };
  CHECK(run(false, 4) == run(false, 4));
  CHECK(run(true, 4) == run(true, 4));
  CHECK(run(false, 4) != run(true, 4));
  CHECK(run(false, 4) != run(false, 5));
}

TEST_CASE("time-adaptive guidance has no effect on the last field evaluation at t = 1") {
  auto m = make_models(17);
  paths::ToyTaskConfig task;
  std::mt19937_64 rng(18);
  auto batch = paths::sample_toy(task, 6, rng);
  guidance::PathSpec path;
  auto guided = guidance::bind_sampled_guidance(m.field, batch.y, path, GuidanceScaling::kTimeAdaptive, 1);
  auto plain = guidance::bind_field(m.field, batch.y, path, nullptr);
  auto t1 = ad::Tensor::full({6, 1}, 1.0);
  CHECK(bitwise_equal(guided(batch.x, t1), plain(batch.x, t1)));
  auto t0 = ad::Tensor::full({6, 1}, 0.0);
  CHECK(!bitwise_equal(guided(batch.x, t0), plain(batch.x, t0)));
}

TEST_CASE("guidance CSV dump") {
  std::mt19937_64 rng(19);
  auto proj = make_projections(2, 3, rng);
  auto ctx = guidance::sample_guidance(4, 2, 1, proj);
  const auto path = std::filesystem::temp_directory_path() / "flower_guidance_test.csv";
  guidance::write_guidance_csv(path.string(), ctx.z);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "row,z0,z1");
  std::getline(in, line);
  CHECK(std::stod(line.substr(line.find(',') + 1)) == ctx.z.at(0));
  std::filesystem::remove(path);
}
