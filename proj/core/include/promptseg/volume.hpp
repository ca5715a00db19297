// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "promptseg/mask.hpp"

namespace promptseg {

using Dims3 = std::array<int, 3>;
using Spacing3 = std::array<double, 3>;
using Index3 = std::array<int, 3>;

enum class VolumeKind { Intensity, Label };

/// Scalar 3D grid, x fastest. Every integer-typed NIfTI voxel and every
/// float32 voxel is represented exactly.
class Volume {
public:
    Volume() = default;
    Volume(Dims3 dims, Spacing3 spacing, VolumeKind kind, float fill = 0.0f);
    Volume(Dims3 dims, Spacing3 spacing, VolumeKind kind, std::vector<float> data);

    const Dims3& dims() const noexcept { return dims_; }
    const Spacing3& spacing() const noexcept { return spacing_; }
    VolumeKind kind() const noexcept { return kind_; }
    std::size_t voxel_count() const noexcept { return data_.size(); }

    std::size_t index(int x, int y, int z) const noexcept {
        return (static_cast<std::size_t>(z) * static_cast<std::size_t>(dims_[1]) + static_cast<std::size_t>(y)) *
                   static_cast<std::size_t>(dims_[0]) +
               static_cast<std::size_t>(x);
    }
    bool contains(int x, int y, int z) const noexcept {
        return x >= 0 && y >= 0 && z >= 0 && x < dims_[0] && y < dims_[1] && z < dims_[2];
    }

    float at(int x, int y, int z) const { return data_[index(x, y, z)]; }
    void set(int x, int y, int z, float value) { data_[index(x, y, z)] = value; }

    const std::vector<float>& data() const noexcept { return data_; }
    std::vector<float>& mutable_data() noexcept { return data_; }

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    Dims3 dims_{1, 1, 1};
    Spacing3 spacing_{1.0, 1.0, 1.0};
    VolumeKind kind_ = VolumeKind::Intensity;
    std::vector<float> data_{0.0f};
};

enum class Orientation { Transversal, Coronal, Sagittal };

std::string_view to_string(Orientation o) noexcept;
Orientation parse_orientation(std::string_view text);

/// Index of the voxel axis held fixed by a slice orientation
/// (transversal: z, coronal: y, sagittal: x).
int fixed_axis(Orientation o) noexcept;
/// Voxel axes that map to image columns and rows.
std::array<int, 2> in_plane_axes(Orientation o) noexcept;
int slice_count(const Dims3& dims, Orientation o) noexcept;
/// Image (width, height) of a slice.
std::array<int, 2> slice_shape(const Dims3& dims, Orientation o) noexcept;
PixelSpacing slice_spacing(const Spacing3& spacing, Orientation o) noexcept;
/// Voxel addressed by pixel (col, row) of slice `index`.
Index3 slice_to_voxel(Orientation o, int index, int col, int row) noexcept;

/// 8-bit grayscale slice replicated over three channels (interleaved RGB).
struct SliceImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
    Orientation orientation = Orientation::Transversal;
    int index = 0;
    PixelSpacing pixel_spacing;

    std::uint8_t gray(int x, int y) const {
        return rgb[3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x))];
    }
    /// Single-channel view (the first channel).
    std::vector<std::uint8_t> gray_pixels() const;
    static SliceImage from_gray(int width, int height, const std::vector<std::uint8_t>& gray);

    friend bool operator==(const SliceImage&, const SliceImage&) = default;
};

/// Inclusive voxel box.
struct Roi3D {
    Index3 min{0, 0, 0};
    Index3 max{0, 0, 0};

    Dims3 extent() const noexcept { return {max[0] - min[0] + 1, max[1] - min[1] + 1, max[2] - min[2] + 1}; }
    friend bool operator==(const Roi3D&, const Roi3D&) = default;
};

bool roi_valid_for(const Roi3D& roi, const Dims3& dims) noexcept;

/// Voxels scaled to round_half_up(255 · value / global_max), clamped to
/// [0, 255]. Throws DegenerateInputError when no voxel is positive.
Volume normalize_intensities(const Volume& v);

/// Throws BoundsError for an index outside the fixed axis and
/// std::invalid_argument if the volume is not 8-bit valued.
SliceImage extract_slice(const Volume& v, Orientation o, int index);

/// Binary slice of a binary (or label) volume; voxel != 0 is true.
BinaryMask2D extract_mask(const Volume& binary, Orientation o, int index);

/// BraTS convention: 1 necrotic core, 2 edema, 4 enhancing tumor.
inline const std::set<int> kDefaultCoreLabels{1, 4};

/// Binary volume, voxel true iff its label is in `core_labels`. Throws
/// ConfigError when `core_labels` is empty.
Volume tumor_core_mask(const Volume& labels, const std::set<int>& core_labels);

/// Tight bounding box of true voxels grown by floor(margin_mm / spacing)
/// voxels per axis and clipped to the grid. Throws EmptyMaskError.
Roi3D tumor_bounding_roi(const Volume& core, double margin_mm);

Volume crop(const Volume& v, const Roi3D& roi);

/// Throws ConfigError naming the first label outside `allowed`.
void validate_labels(const Volume& labels, const std::set<int>& allowed);

}  // namespace promptseg
