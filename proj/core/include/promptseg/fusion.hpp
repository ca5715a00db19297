// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <utility>
#include <vector>

#include "promptseg/mask.hpp"
#include "promptseg/volume.hpp"

namespace promptseg {

struct StackedSegmentation {
    Orientation orientation = Orientation::Transversal;
    Volume volume;  // binary, VolumeKind::Label
    std::set<int> covered_slices;
};

using SliceMask = std::pair<int, BinaryMask2D>;

/// Writes each slice mask into its plane of an otherwise empty volume.
/// Throws on a duplicate index, an index outside the grid or a mask whose
/// shape differs from the orientation's slice shape.
StackedSegmentation stack_slices(const Dims3& dims, const Spacing3& spacing, Orientation orientation,
                                 const std::vector<SliceMask>& slices);

/// Voxel true iff true in at least two of the three inputs.
Volume majority_vote(const Volume& a, const Volume& b, const Volume& c);

/// 2|pred∩gt| / (|pred|+|gt|) over nonzero voxels; 1.0 when both are empty.
double volumetric_dice(const Volume& pred, const Volume& gt);

}  // namespace promptseg
