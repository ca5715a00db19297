// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "promptseg/volume.hpp"

namespace promptseg {

/// Storage types of the supported NIfTI-1 subset (values are the header codes).
enum class NiftiDatatype : std::int16_t {
    UInt8 = 2,
    Int16 = 4,
    Float32 = 16,
};

/// Smallest supported type holding every voxel exactly.
NiftiDatatype smallest_lossless_datatype(const Volume& v);

/// Decodes a single-file NIfTI-1 image (".nii" layout, either byte order).
/// Supported: 3 spatial dimensions, datatype uint8/int16/float32. Orientation
/// matrices are ignored (identity grid). Throws UnsupportedNiftiError for
/// anything else and IoError for truncated data.
Volume decode_nifti(std::span<const std::uint8_t> bytes, VolumeKind kind = VolumeKind::Intensity);

/// Encodes a little-endian single-file NIfTI-1 image with identity
/// orientation. Throws std::invalid_argument when a voxel does not fit.
std::vector<std::uint8_t> encode_nifti(const Volume& v, std::optional<NiftiDatatype> datatype = std::nullopt);

/// Reads `.nii` or `.nii.gz` (compression detected from content).
Volume load_volume(const std::filesystem::path& path, VolumeKind kind = VolumeKind::Intensity);

/// Writes `.nii`, or gzip-compressed when the name ends in `.gz`.
void write_volume(const std::filesystem::path& path, const Volume& v,
                  std::optional<NiftiDatatype> datatype = std::nullopt);

}  // namespace promptseg
