// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace promptseg {

/// Pixel coordinate: x is the column, y the row.
struct Pixel {
    int x = 0;
    int y = 0;

    friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Physical size of one pixel in mm (column spacing, row spacing).
struct PixelSpacing {
    double x = 1.0;
    double y = 1.0;
};

/// Row-major binary mask. One byte per pixel holding 0 or 1.
class BinaryMask2D {
public:
    BinaryMask2D() = default;
    BinaryMask2D(int width, int height, bool fill = false);
    BinaryMask2D(int width, int height, std::vector<std::uint8_t> bits);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool value = true) { bits_[index(x, y)] = value ? 1 : 0; }

    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

    std::size_t count() const noexcept;
    bool empty_mask() const noexcept { return count() == 0; }
    bool same_shape(const BinaryMask2D& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const BinaryMask2D&, const BinaryMask2D&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Run-length form of a mask. Runs alternate false/true starting with the
/// number of leading false pixels in row-major order; only the first run may
/// be zero.
struct RleMask {
    int width = 0;
    int height = 0;
    std::vector<std::int64_t> counts;

    friend bool operator==(const RleMask&, const RleMask&) = default;
};

// Mask algebra. All binary operations throw DimensionMismatchError when the
// operands differ in shape.
std::size_t intersection_count(const BinaryMask2D& a, const BinaryMask2D& b);
std::size_t union_count(const BinaryMask2D& a, const BinaryMask2D& b);

/// |a∩b| / |a∪b|; 1.0 when both masks are empty.
double iou(const BinaryMask2D& a, const BinaryMask2D& b);

/// 2|a∩b| / (|a|+|b|); 1.0 when both masks are empty.
double dice(const BinaryMask2D& a, const BinaryMask2D& b);

BinaryMask2D intersection(const BinaryMask2D& a, const BinaryMask2D& b);
/// Pixels in `a` that are not in `b`.
BinaryMask2D difference(const BinaryMask2D& a, const BinaryMask2D& b);

/// Area in mm²: number of true pixels times the pixel footprint.
double area(const BinaryMask2D& mask, PixelSpacing spacing);

/// Squared Euclidean distance from every true pixel to the nearest false
/// pixel, with everything outside the image counted as false. False pixels
/// map to 0. Exact integer arithmetic (separable lower-envelope algorithm).
std::vector<std::int64_t> squared_distance_transform(const BinaryMask2D& mask);

/// Square root of squared_distance_transform, in pixel units.
std::vector<double> distance_transform(const BinaryMask2D& mask);

/// The deepest interior pixel: argmax of the distance transform, ties broken
/// by smallest row, then smallest column. Throws EmptyMaskError.
Pixel interior_center(const BinaryMask2D& mask);

enum class Connectivity { Four, Eight };

/// Region labelling. `labels[i]` is 0 for background, otherwise a 1-based
/// region id; ids are assigned in row-major order of each region's first
/// pixel. `sizes[id - 1]` is the pixel count of region `id`.
struct ComponentLabels {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;
    std::vector<std::size_t> sizes;

    std::size_t region_count() const noexcept { return sizes.size(); }
};

ComponentLabels connected_components(const BinaryMask2D& mask, Connectivity connectivity = Connectivity::Eight);

/// Mask of the largest 8-connected region (ties: smallest region id). An
/// empty mask maps to itself.
BinaryMask2D largest_component(const BinaryMask2D& mask, Connectivity connectivity = Connectivity::Eight);

RleMask rle_encode(const BinaryMask2D& mask);
/// Throws MalformedRleError when the runs do not describe width·height pixels
/// or contain a zero-length interior run.
BinaryMask2D rle_decode(const RleMask& rle);

void to_json(nlohmann::json& j, const RleMask& rle);
void from_json(const nlohmann::json& j, RleMask& rle);

}  // namespace promptseg
