// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations. Slow on purpose: each one follows
// the textbook definition so the fast library code can be checked against it.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "promptseg/mask.hpp"
#include "promptseg/volume.hpp"

namespace promptseg::testing {

/// Uniform random bits.
BinaryMask2D random_mask(std::mt19937& rng, int width, int height, double density);
/// Union of a few random discs and rectangles; gives large connected regions.
BinaryMask2D random_blobs(std::mt19937& rng, int width, int height, int count);

/// Squared distance from every pixel to the nearest background pixel, with
/// everything outside the grid counted as background.
std::vector<std::int64_t> brute_squared_distance(const BinaryMask2D& mask);

/// Region labels by breadth-first flood fill, ids in row-major order of the
/// first pixel of each region.
std::vector<std::int32_t> flood_fill_labels(const BinaryMask2D& mask, bool eight_connected);

/// Voxel-wise count of nonzero inputs ≥ 2.
Volume brute_majority(const Volume& a, const Volume& b, const Volume& c);

/// Two-sided exact p of the rank-sum statistic by listing every split of the
/// pooled ranks into groups of the original sizes.
double enumerate_rank_sum_p(std::span<const double> a, std::span<const double> b);
/// Two-sided exact p of the signed-rank statistic by listing every sign vector.
double enumerate_signed_rank_p(std::span<const double> differences);

Volume random_binary_volume(std::mt19937& rng, Dims3 dims, double density);

}  // namespace promptseg::testing
