// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/fusion.hpp"

#include <fmt/format.h>

#include "promptseg/errors.hpp"

namespace promptseg {

StackedSegmentation stack_slices(const Dims3& dims, const Spacing3& spacing, Orientation orientation,
                                 const std::vector<SliceMask>& slices) {
    StackedSegmentation stacked{orientation, Volume(dims, spacing, VolumeKind::Label, 0.0f), {}};
    const auto [width, height] = slice_shape(dims, orientation);
    const int count = slice_count(dims, orientation);
    for (const auto& [index, mask] : slices) {
        if (index < 0 || index >= count) {
            throw BoundsError(fmt::format("stack_slices: {} slice {} outside [0, {})", to_string(orientation),
                                          index, count));
        }
        if (mask.width() != width || mask.height() != height) {
            throw DimensionMismatchError(fmt::format("stack_slices: slice {} mask is {}x{}, expected {}x{}", index,
                                                     mask.width(), mask.height(), width, height));
        }
        if (!stacked.covered_slices.insert(index).second) {
            throw std::invalid_argument(fmt::format("stack_slices: duplicate slice index {}", index));
        }
        for (int row = 0; row < height; ++row) {
            for (int col = 0; col < width; ++col) {
                if (mask.at(col, row)) {
                    const auto v = slice_to_voxel(orientation, index, col, row);
                    stacked.volume.set(v[0], v[1], v[2], 1.0f);
                }
            }
        }
    }
    return stacked;
}

Volume majority_vote(const Volume& a, const Volume& b, const Volume& c) {
    if (a.dims() != b.dims() || a.dims() != c.dims()) {
        throw DimensionMismatchError("majority_vote: volume dimensions differ");
    }
    std::vector<float> out(a.voxel_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int votes = (a.data()[i] != 0.0f) + (b.data()[i] != 0.0f) + (c.data()[i] != 0.0f);
        out[i] = votes >= 2 ? 1.0f : 0.0f;
    }
    return {a.dims(), a.spacing(), VolumeKind::Label, std::move(out)};
}

double volumetric_dice(const Volume& pred, const Volume& gt) {
    if (pred.dims() != gt.dims()) {
        throw DimensionMismatchError("volumetric_dice: volume dimensions differ");
    }
    std::size_t both = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < pred.voxel_count(); ++i) {
        const bool p = pred.data()[i] != 0.0f;
        const bool g = gt.data()[i] != 0.0f;
        both += static_cast<std::size_t>(p && g);
        total += static_cast<std::size_t>(p) + static_cast<std::size_t>(g);
    }
    if (total == 0) {
        return 1.0;
    }
    return 2.0 * static_cast<double>(both) / static_cast<double>(total);
}

}  // namespace promptseg
