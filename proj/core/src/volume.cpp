// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace {

void check_geometry(const Dims3& dims, const Spacing3& spacing) {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) {
            throw std::invalid_argument(fmt::format("Volume: dimension {} is {}, must be >= 1", a, dims[a]));
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw std::invalid_argument(fmt::format("Volume: spacing {} is {}, must be > 0", a, spacing[a]));
        }
    }
}

std::size_t voxels_of(const Dims3& dims) {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
}

}  // namespace

Volume::Volume(Dims3 dims, Spacing3 spacing, VolumeKind kind, float fill)
    : dims_(dims), spacing_(spacing), kind_(kind) {
    check_geometry(dims_, spacing_);
    data_.assign(voxels_of(dims_), fill);
}

Volume::Volume(Dims3 dims, Spacing3 spacing, VolumeKind kind, std::vector<float> data)
    : dims_(dims), spacing_(spacing), kind_(kind), data_(std::move(data)) {
    check_geometry(dims_, spacing_);
    if (data_.size() != voxels_of(dims_)) {
        throw DimensionMismatchError(fmt::format("Volume: {} values for a {}x{}x{} grid", data_.size(), dims_[0],
                                                 dims_[1], dims_[2]));
    }
}

std::string_view to_string(Orientation o) noexcept {
    switch (o) {
        case Orientation::Transversal:
            return "transversal";
        case Orientation::Coronal:
            return "coronal";
        case Orientation::Sagittal:
            return "sagittal";
    }
    return "transversal";
}

Orientation parse_orientation(std::string_view text) {
    if (text == "transversal" || text == "axial") {
        return Orientation::Transversal;
    }
    if (text == "coronal") {
        return Orientation::Coronal;
    }
    if (text == "sagittal") {
        return Orientation::Sagittal;
    }
    throw ConfigError(fmt::format("unknown orientation '{}'", text));
}

int fixed_axis(Orientation o) noexcept {
    switch (o) {
        case Orientation::Transversal:
            return 2;
        case Orientation::Coronal:
            return 1;
        case Orientation::Sagittal:
            return 0;
    }
    return 2;
}

std::array<int, 2> in_plane_axes(Orientation o) noexcept {
    switch (o) {
        case Orientation::Transversal:
            return {0, 1};
        case Orientation::Coronal:
            return {0, 2};
        case Orientation::Sagittal:
            return {1, 2};
    }
    return {0, 1};
}

int slice_count(const Dims3& dims, Orientation o) noexcept { return dims[fixed_axis(o)]; }

std::array<int, 2> slice_shape(const Dims3& dims, Orientation o) noexcept {
    const auto axes = in_plane_axes(o);
    return {dims[axes[0]], dims[axes[1]]};
}

PixelSpacing slice_spacing(const Spacing3& spacing, Orientation o) noexcept {
    const auto axes = in_plane_axes(o);
    return {spacing[axes[0]], spacing[axes[1]]};
}

Index3 slice_to_voxel(Orientation o, int index, int col, int row) noexcept {
    Index3 voxel{};
    const auto axes = in_plane_axes(o);
    voxel[fixed_axis(o)] = index;
    voxel[axes[0]] = col;
    voxel[axes[1]] = row;
    return voxel;
}

std::vector<std::uint8_t> SliceImage::gray_pixels() const {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = rgb[3 * i];
    }
    return out;
}

SliceImage SliceImage::from_gray(int width, int height, const std::vector<std::uint8_t>& gray) {
    if (gray.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DimensionMismatchError(fmt::format("SliceImage: {} pixels for {}x{}", gray.size(), width, height));
    }
    SliceImage image;
    image.width = width;
    image.height = height;
    image.rgb.resize(gray.size() * 3);
    for (std::size_t i = 0; i < gray.size(); ++i) {
        image.rgb[3 * i] = image.rgb[3 * i + 1] = image.rgb[3 * i + 2] = gray[i];
    }
    return image;
}

bool roi_valid_for(const Roi3D& roi, const Dims3& dims) noexcept {
    for (int a = 0; a < 3; ++a) {
        if (roi.min[a] < 0 || roi.min[a] > roi.max[a] || roi.max[a] >= dims[a]) {
            return false;
        }
    }
    return true;
}

Volume normalize_intensities(const Volume& v) {
    if (v.kind() != VolumeKind::Intensity) {
        throw std::invalid_argument("normalize_intensities: label volume given");
    }
    const float global_max = *std::max_element(v.data().begin(), v.data().end());
    if (!(global_max > 0.0f)) {
        throw DegenerateInputError("degenerate intensity range: no voxel above zero");
    }
    std::vector<float> out(v.voxel_count());
    const double max = global_max;
    std::transform(v.data().begin(), v.data().end(), out.begin(), [max](float value) {
        const double scaled = std::floor(255.0 * static_cast<double>(value) / max + 0.5);
        return static_cast<float>(std::clamp(scaled, 0.0, 255.0));
    });
    return {v.dims(), v.spacing(), VolumeKind::Intensity, std::move(out)};
}

SliceImage extract_slice(const Volume& v, Orientation o, int index) {
    const int count = slice_count(v.dims(), o);
    if (index < 0 || index >= count) {
        throw BoundsError(fmt::format("{} slice {} outside [0, {})", to_string(o), index, count));
    }
    const auto [width, height] = slice_shape(v.dims(), o);
    SliceImage image;
    image.width = width;
    image.height = height;
    image.orientation = o;
    image.index = index;
    image.pixel_spacing = slice_spacing(v.spacing(), o);
    image.rgb.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    std::size_t p = 0;
    for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
            const auto voxel = slice_to_voxel(o, index, col, row);
            const float value = v.at(voxel[0], voxel[1], voxel[2]);
            if (!(value >= 0.0f && value <= 255.0f) || value != std::floor(value)) {
                throw std::invalid_argument(
                    fmt::format("extract_slice: voxel value {} is not 8-bit; normalize first", value));
            }
            const auto byte = static_cast<std::uint8_t>(value);
            image.rgb[p++] = byte;
            image.rgb[p++] = byte;
            image.rgb[p++] = byte;
        }
    }
    return image;
}

BinaryMask2D extract_mask(const Volume& binary, Orientation o, int index) {
    const int count = slice_count(binary.dims(), o);
    if (index < 0 || index >= count) {
        throw BoundsError(fmt::format("{} slice {} outside [0, {})", to_string(o), index, count));
    }
    const auto [width, height] = slice_shape(binary.dims(), o);
    BinaryMask2D mask(width, height);
    for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
            const auto voxel = slice_to_voxel(o, index, col, row);
            if (binary.at(voxel[0], voxel[1], voxel[2]) != 0.0f) {
                mask.set(col, row);
            }
        }
    }
    return mask;
}

Volume tumor_core_mask(const Volume& labels, const std::set<int>& core_labels) {
    if (core_labels.empty()) {
        throw ConfigError("core_labels: must name at least one label");
    }
    if (labels.kind() != VolumeKind::Label) {
        throw std::invalid_argument("tumor_core_mask: intensity volume given");
    }
    std::vector<float> out(labels.voxel_count());
    std::transform(labels.data().begin(), labels.data().end(), out.begin(), [&](float value) {
        return core_labels.contains(static_cast<int>(std::lround(value))) ? 1.0f : 0.0f;
    });
    return {labels.dims(), labels.spacing(), VolumeKind::Label, std::move(out)};
}

Roi3D tumor_bounding_roi(const Volume& core, double margin_mm) {
    const auto& dims = core.dims();
    Index3 lo{dims[0], dims[1], dims[2]};
    Index3 hi{-1, -1, -1};
    for (int z = 0; z < dims[2]; ++z) {
        for (int y = 0; y < dims[1]; ++y) {
            for (int x = 0; x < dims[0]; ++x) {
                if (core.at(x, y, z) == 0.0f) {
                    continue;
                }
                lo = {std::min(lo[0], x), std::min(lo[1], y), std::min(lo[2], z)};
                hi = {std::max(hi[0], x), std::max(hi[1], y), std::max(hi[2], z)};
            }
        }
    }
    if (hi[0] < 0) {
        throw EmptyMaskError("tumor_bounding_roi: no tumor voxels");
    }
    Roi3D roi;
    for (int a = 0; a < 3; ++a) {
        // Small epsilon so exact ratios such as 20 / 0.1 do not floor down.
        const int margin = static_cast<int>(std::floor(margin_mm / core.spacing()[a] + 1e-9));
        roi.min[a] = std::max(0, lo[a] - margin);
        roi.max[a] = std::min(dims[a] - 1, hi[a] + margin);
    }
    return roi;
}

Volume crop(const Volume& v, const Roi3D& roi) {
    if (!roi_valid_for(roi, v.dims())) {
        throw BoundsError("crop: region of interest outside the volume");
    }
    const Dims3 extent = roi.extent();
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(extent[0]) * extent[1] * extent[2]);
    for (int z = roi.min[2]; z <= roi.max[2]; ++z) {
        for (int y = roi.min[1]; y <= roi.max[1]; ++y) {
            const auto begin = v.data().begin() + static_cast<std::ptrdiff_t>(v.index(roi.min[0], y, z));
            out.insert(out.end(), begin, begin + extent[0]);
        }
    }
    return {extent, v.spacing(), v.kind(), std::move(out)};
}

void validate_labels(const Volume& labels, const std::set<int>& allowed) {
    for (const float value : labels.data()) {
        const auto label = static_cast<int>(std::lround(value));
        if (static_cast<float>(label) != value || !allowed.contains(label)) {
            throw ConfigError(fmt::format("label volume contains undeclared label {}", value));
        }
    }
}

}  // namespace promptseg
