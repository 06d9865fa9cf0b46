// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "flower/flow/flow_stack.hpp"
#include "flower/guidance/context.hpp"
#include "flower/paths/field_network.hpp"
#include "flower/paths/ot_path.hpp"
#include "flower/paths/score_sde.hpp"

namespace flower::guidance {

enum class Framework { kScore, kFlowMatching };

/// One generative framework and its loss settings. The score framework
/// reads the field network output as sigma(t) * score.
struct PathSpec {
  Framework framework = Framework::kFlowMatching;
  paths::SdeSpec sde{};
  paths::OtPathSpec ot{};
  paths::ScoreWeighting weighting = paths::ScoreWeighting::kSigmaSquared;
  double t_eps = 1e-5;
};

/// z = flow(x_clean | c_latent).z in training mode. When `forward` is given
/// it receives the full flow output (z and log-det) for the NF loss.
GuidanceContext extract_guidance(const flow::FlowStack& flow, const ad::Tensor& x_clean, const ad::Tensor& c_latent,
                                 const Projections& projections, GuidanceScaling scaling = GuidanceScaling::kConstant,
                                 flow::FlowOutput* forward = nullptr);

struct JointLoss {
  ad::Tensor l_unet;
  ad::Tensor l_nf;
  ad::Tensor total;
};

struct JointOptions {
  PathSpec path{};
  GuidanceScaling scaling = GuidanceScaling::kConstant;
  /// Feed c_latent.detach() to the flow so the NF loss cannot reach the
  /// field network's trunk.
  bool detach_latent = false;
};

/// One training batch of the guided objective: the field trunk produces
/// c_latent from (x_t, y, t), the flow turns (x_clean, c_latent) into z, and
/// the field head predicts with z injected. total = l_unet + l_nf.
JointLoss joint_loss(const paths::FieldNetwork& field, const flow::FlowStack& flow, const ad::Tensor& x_clean,
                     const ad::Tensor& y, const JointOptions& options, std::mt19937_64& rng);

/// The same generative loss without guidance (the baseline objective).
ad::Tensor field_loss(const paths::FieldNetwork& field, const ad::Tensor& x_clean, const ad::Tensor& y,
                      const PathSpec& path, std::mt19937_64& rng);

/// Field (flow matching) or score (score framework) callable for the
/// samplers, conditioned on y. `ctx` may be null for the baseline.
paths::FieldFn bind_field(const paths::FieldNetwork& field, const ad::Tensor& y, const PathSpec& path,
                          const GuidanceContext* ctx);

/// Inference binding with z ~ N(0, I) drawn from `seed`. With
/// `resample_per_step` a fresh z is drawn on every call, from the same
/// seeded stream, so runs stay reproducible. Never touches a flow.
paths::FieldFn bind_sampled_guidance(const paths::FieldNetwork& field, const ad::Tensor& y, const PathSpec& path,
                                     GuidanceScaling scaling, std::uint64_t seed, bool resample_per_step = false);

/// Writes z as CSV with header row,z0,z1,...
void write_guidance_csv(const std::string& path, const ad::Tensor& z);

}  // namespace flower::guidance
