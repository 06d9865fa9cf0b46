// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/guidance/joint.hpp"

#include <fstream>
#include <memory>
#include <stdexcept>

#include "flower/autodiff/ops.hpp"

namespace flower::guidance {

namespace {

// Noised input, time, and the prediction-to-loss step for one framework.
struct GenerativeDraw {
  ad::Tensor x_t;
  ad::Tensor t;
  paths::ScoreDraw score;
  ad::Tensor target_field;
};

GenerativeDraw draw_inputs(const ad::Tensor& x_clean, const PathSpec& path, std::mt19937_64& rng) {
  GenerativeDraw d;
  const std::size_t rows = x_clean.size(0), dim = x_clean.size(1);
  if (path.framework == Framework::kScore) {
    d.score = paths::draw_score_inputs(rows, dim, rng, path.t_eps);
    d.t = d.score.t;
    d.x_t = paths::sde_perturb(x_clean, d.t, d.score.noise, path.sde);
  } else {
    auto fm = paths::draw_fm_inputs(rows, dim, rng);
    d.t = fm.t;
    d.x_t = paths::ot_interpolate(fm.x0, x_clean, fm.t, path.ot);
    d.target_field = paths::ot_target_field(fm.x0, x_clean, path.ot);
  }
  return d;
}

ad::Tensor generative_loss(const ad::Tensor& out, const GenerativeDraw& d, const PathSpec& path) {
  if (path.framework == Framework::kScore) {
    return paths::score_loss_from_prediction(paths::score_from_output(out, d.t, path.sde), d.score, path.sde,
                                             path.weighting);
  }
  return paths::mean_squared_norm(ad::sub(out, d.target_field));
}

}  // namespace

GuidanceContext extract_guidance(const flow::FlowStack& flow, const ad::Tensor& x_clean, const ad::Tensor& c_latent,
                                 const Projections& projections, GuidanceScaling scaling, flow::FlowOutput* forward) {
  flow::FlowOutput out = flow.forward(x_clean, c_latent);
  GuidanceContext ctx;
  ctx.z = out.z;
  ctx.mode = GuidanceMode::kTrain;
  ctx.scaling = scaling;
  ctx.projections = projections;
  if (forward != nullptr) *forward = std::move(out);
  return ctx;
}

JointLoss joint_loss(const paths::FieldNetwork& field, const flow::FlowStack& flow, const ad::Tensor& x_clean,
                     const ad::Tensor& y, const JointOptions& options, std::mt19937_64& rng) {
  if (!field.has_guidance()) throw std::invalid_argument("joint loss needs a field network with guidance");
  const GenerativeDraw d = draw_inputs(x_clean, options.path, rng);
  const ad::Tensor c_latent = field.trunk(d.x_t, y, d.t);
  flow::FlowOutput forward;
  const GuidanceContext ctx =
      extract_guidance(flow, x_clean, options.detach_latent ? c_latent.detach() : c_latent, field.projections(),
                       options.scaling, &forward);
  JointLoss loss;
  loss.l_unet = generative_loss(field.head(c_latent, d.t, &ctx), d, options.path);
  loss.l_nf = flow::nf_loss(forward).nll;
  loss.total = ad::add(loss.l_unet, loss.l_nf);
  return loss;
}

ad::Tensor field_loss(const paths::FieldNetwork& field, const ad::Tensor& x_clean, const ad::Tensor& y,
                      const PathSpec& path, std::mt19937_64& rng) {
  const GenerativeDraw d = draw_inputs(x_clean, path, rng);
  return generative_loss(field(d.x_t, y, d.t), d, path);
}

paths::FieldFn bind_field(const paths::FieldNetwork& field, const ad::Tensor& y, const PathSpec& path,
                          const GuidanceContext* ctx) {
  return [&field, y, path, ctx](const ad::Tensor& x_t, const ad::Tensor& t) {
    ad::Tensor out = field(x_t, y, t, ctx);
    return path.framework == Framework::kScore ? paths::score_from_output(out, t, path.sde) : out;
  };
}

paths::FieldFn bind_sampled_guidance(const paths::FieldNetwork& field, const ad::Tensor& y, const PathSpec& path,
                                     GuidanceScaling scaling, std::uint64_t seed, bool resample_per_step) {
  if (!field.has_guidance()) throw std::invalid_argument("field network was built without guidance");
  const std::size_t rows = y.size(0), dim = field.config().guidance_dim;
  auto ctx = std::make_shared<GuidanceContext>(sample_guidance(rows, dim, seed, field.projections(), scaling));
  auto stream = std::make_shared<std::mt19937_64>(seed ^ 0x9e3779b97f4a7c15ULL);
  return [&field, y, path, ctx, stream, resample_per_step](const ad::Tensor& x_t, const ad::Tensor& t) {
    if (resample_per_step) {
      std::normal_distribution<double> normal;
      for (auto& v : ctx->z.mutable_data()) v = normal(*stream);
    }
    ad::Tensor out = field(x_t, y, t, ctx.get());
    return path.framework == Framework::kScore ? paths::score_from_output(out, t, path.sde) : out;
  };
}

void write_guidance_csv(const std::string& path, const ad::Tensor& z) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open guidance file " + path);
  out.precision(17);
  const std::size_t d = z.size(1);
  out << "row";
  for (std::size_t j = 0; j < d; ++j) out << ",z" << j;
  out << '\n';
  for (std::size_t r = 0; r < z.size(0); ++r) {
    out << r;
    for (std::size_t j = 0; j < d; ++j) out << ',' << z.at(r * d + j);
    out << '\n';
  }
}

}  // namespace flower::guidance
