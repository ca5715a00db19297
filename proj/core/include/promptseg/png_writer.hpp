// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace promptseg {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

/// 8-bit grayscale PNG, in memory.
std::vector<std::uint8_t> encode_png_gray(const GrayImage& image);
/// Accepts 8-bit grayscale PNGs only. Throws IoError.
GrayImage decode_png_gray(std::span<const std::uint8_t> bytes);

}  // namespace promptseg
