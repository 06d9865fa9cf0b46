// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace flower::ad {

/// Keeps large tensor buffers on the heap instead of fresh mmap pages.
/// Training allocates and frees the same large blocks every step; with the
/// glibc defaults each one is a page-faulting mmap. Call once from main().
/// No-op on other C libraries.
void configure_allocator();

}  // namespace flower::ad
