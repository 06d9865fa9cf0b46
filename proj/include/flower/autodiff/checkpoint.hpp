// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "flower/autodiff/mlp.hpp"

namespace flower::ad {

// Checkpoint layout, all integers and floats little-endian:
//
//   magic   8 bytes  "FLWRCKPT"
//   version u32      1
//   count   u32      number of tensors
//   per tensor:
//     name_len u32, name bytes (UTF-8, no terminator)
//     rank u32, rank x u64 dimensions
//     numel x f64 values, row-major
inline constexpr char kCheckpointMagic[8] = {'F', 'L', 'W', 'R', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `targets` by name. Every target must be present
/// with a matching shape.
void restore_checkpoint(const std::filesystem::path& path, std::vector<NamedTensor>& targets);

}  // namespace flower::ad
