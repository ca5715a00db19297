// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>

#include <fmt/format.h>
#include <zlib.h>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;  // header + 4-byte extension flag

// Byte offsets into the NIfTI-1 header.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffMagic = 344;

class HeaderReader {
public:
    HeaderReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <typename T>
    T get(std::size_t offset) const {
        std::array<std::uint8_t, sizeof(T)> raw{};
        std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
        if (swap_) {
            std::reverse(raw.begin(), raw.end());
        }
        T value;
        std::memcpy(&value, raw.data(), sizeof(T));
        return value;
    }

private:
    std::span<const std::uint8_t> bytes_;
    bool swap_;
};

template <typename T>
void put(std::vector<std::uint8_t>& out, std::size_t offset, T value) {
    static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
    std::memcpy(out.data() + offset, &value, sizeof(T));
}

std::size_t bytes_per_voxel(NiftiDatatype type) {
    switch (type) {
        case NiftiDatatype::UInt8:
            return 1;
        case NiftiDatatype::Int16:
            return 2;
        case NiftiDatatype::Float32:
            return 4;
    }
    return 0;
}

bool is_integral(float value) { return std::isfinite(value) && value == std::floor(value); }

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    // gzread passes uncompressed files through unchanged.
    gzFile file = gzopen(path.string().c_str(), "rb");
    if (file == nullptr) {
        throw IoError(fmt::format("cannot open '{}'", path.string()));
    }
    std::unique_ptr<gzFile_s, decltype(&gzclose)> guard(file, &gzclose);
    std::vector<std::uint8_t> bytes;
    std::array<std::uint8_t, 1 << 16> chunk{};
    for (;;) {
        const int n = gzread(file, chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) {
            int code = 0;
            const char* message = gzerror(file, &code);
            throw IoError(fmt::format("reading '{}': {}", path.string(), message));
        }
        if (n == 0) {
            break;
        }
        bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + n);
    }
    // A gzip stream cut short reads as a clean EOF on some zlib versions.
    int code = 0;
    gzerror(file, &code);
    if (code != Z_OK && code != Z_BUF_ERROR) {
        throw IoError(fmt::format("reading '{}': truncated compressed stream", path.string()));
    }
    return bytes;
}

}  // namespace

NiftiDatatype smallest_lossless_datatype(const Volume& v) {
    bool integral = true;
    float lo = std::numeric_limits<float>::max();
    float hi = std::numeric_limits<float>::lowest();
    for (const float value : v.data()) {
        integral = integral && is_integral(value);
        lo = std::min(lo, value);
        hi = std::max(hi, value);
    }
    if (integral && lo >= 0.0f && hi <= 255.0f) {
        return NiftiDatatype::UInt8;
    }
    if (integral && lo >= -32768.0f && hi <= 32767.0f) {
        return NiftiDatatype::Int16;
    }
    return NiftiDatatype::Float32;
}

Volume decode_nifti(std::span<const std::uint8_t> bytes, VolumeKind kind) {
    if (bytes.size() < kHeaderSize) {
        throw IoError(fmt::format("NIfTI: truncated header ({} bytes)", bytes.size()));
    }
    std::int32_t sizeof_hdr = 0;
    std::memcpy(&sizeof_hdr, bytes.data(), 4);
    bool swap = false;
    if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
        swap = true;
        if (HeaderReader(bytes, true).get<std::int32_t>(0) != static_cast<std::int32_t>(kHeaderSize)) {
            throw UnsupportedNiftiError("sizeof_hdr", "not 348; not a NIfTI-1 header");
        }
    }
    const HeaderReader header(bytes, swap);

    if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0) {
        throw UnsupportedNiftiError("magic", "only single-file 'n+1' images are supported");
    }

    const auto ndim = header.get<std::int16_t>(kOffDim);
    if (ndim < 3 || ndim > 7) {
        throw UnsupportedNiftiError("dim[0]", fmt::format("{} dimensions, need 3", ndim));
    }
    Dims3 dims{};
    for (int a = 0; a < 3; ++a) {
        dims[a] = header.get<std::int16_t>(kOffDim + 2 * (a + 1));
        if (dims[a] < 1) {
            throw UnsupportedNiftiError(fmt::format("dim[{}]", a + 1), fmt::format("size {}", dims[a]));
        }
    }
    for (int a = 4; a <= ndim; ++a) {
        const auto extra = header.get<std::int16_t>(kOffDim + 2 * a);
        if (extra > 1) {
            throw UnsupportedNiftiError(fmt::format("dim[{}]", a),
                                        fmt::format("non-spatial extent {}, only 3D images supported", extra));
        }
    }

    const auto code = header.get<std::int16_t>(kOffDatatype);
    NiftiDatatype type{};
    switch (code) {
        case static_cast<std::int16_t>(NiftiDatatype::UInt8):
        case static_cast<std::int16_t>(NiftiDatatype::Int16):
        case static_cast<std::int16_t>(NiftiDatatype::Float32):
            type = static_cast<NiftiDatatype>(code);
            break;
        default:
            throw UnsupportedNiftiError("datatype", fmt::format("code {}; supported: uint8, int16, float32", code));
    }

    Spacing3 spacing{};
    for (int a = 0; a < 3; ++a) {
        const float pixdim = header.get<float>(kOffPixdim + 4 * (a + 1));
        spacing[a] = pixdim > 0.0f && std::isfinite(pixdim) ? static_cast<double>(pixdim) : 1.0;
    }

    const float vox_offset = header.get<float>(kOffVoxOffset);
    const auto offset = static_cast<std::size_t>(std::max(vox_offset, static_cast<float>(kHeaderSize)));
    const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    const std::size_t bpp = bytes_per_voxel(type);
    if (bytes.size() < offset + count * bpp) {
        throw IoError(fmt::format("NIfTI: truncated voxel data ({} of {} bytes)",
                                  bytes.size() > offset ? bytes.size() - offset : 0, count * bpp));
    }

    float slope = header.get<float>(kOffSclSlope);
    float inter = header.get<float>(kOffSclInter);
    const bool scaled = slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f);
    if (!std::isfinite(inter)) {
        inter = 0.0f;
    }

    std::vector<float> data(count);
    const HeaderReader voxels(bytes.subspan(offset), swap);
    for (std::size_t i = 0; i < count; ++i) {
        float value = 0.0f;
        switch (type) {
            case NiftiDatatype::UInt8:
                value = bytes[offset + i];
                break;
            case NiftiDatatype::Int16:
                value = voxels.get<std::int16_t>(2 * i);
                break;
            case NiftiDatatype::Float32:
                value = voxels.get<float>(4 * i);
                break;
        }
        data[i] = scaled ? value * slope + inter : value;
    }
    return {dims, spacing, kind, std::move(data)};
}

std::vector<std::uint8_t> encode_nifti(const Volume& v, std::optional<NiftiDatatype> datatype) {
    const NiftiDatatype type = datatype.value_or(smallest_lossless_datatype(v));
    const std::size_t bpp = bytes_per_voxel(type);
    std::vector<std::uint8_t> out(kDataOffset + v.voxel_count() * bpp, 0);

    put<std::int32_t>(out, 0, static_cast<std::int32_t>(kHeaderSize));
    out[38] = 'r';  // regular
    put<std::int16_t>(out, kOffDim, 3);
    for (int a = 0; a < 3; ++a) {
        put<std::int16_t>(out, kOffDim + 2 * (a + 1), static_cast<std::int16_t>(v.dims()[a]));
    }
    for (int a = 4; a < 8; ++a) {
        put<std::int16_t>(out, kOffDim + 2 * a, 1);
    }
    put<std::int16_t>(out, kOffDatatype, static_cast<std::int16_t>(type));
    put<std::int16_t>(out, kOffBitpix, static_cast<std::int16_t>(8 * bpp));
    put<float>(out, kOffPixdim, 1.0f);  // qfac
    for (int a = 0; a < 3; ++a) {
        put<float>(out, kOffPixdim + 4 * (a + 1), static_cast<float>(v.spacing()[a]));
    }
    put<float>(out, kOffVoxOffset, static_cast<float>(kDataOffset));
    put<float>(out, kOffSclSlope, 1.0f);
    put<float>(out, kOffSclInter, 0.0f);
    out[kOffXyztUnits] = 2;                 // millimetres
    put<std::int16_t>(out, kOffQformCode, 1);  // scanner grid, identity rotation
    std::memcpy(out.data() + kOffMagic, "n+1\0", 4);

    std::uint8_t* dst = out.data() + kDataOffset;
    for (std::size_t i = 0; i < v.voxel_count(); ++i) {
        const float value = v.data()[i];
        switch (type) {
            case NiftiDatatype::UInt8:
                if (!is_integral(value) || value < 0.0f || value > 255.0f) {
                    throw std::invalid_argument(fmt::format("encode_nifti: {} does not fit uint8", value));
                }
                dst[i] = static_cast<std::uint8_t>(value);
                break;
            case NiftiDatatype::Int16: {
                if (!is_integral(value) || value < -32768.0f || value > 32767.0f) {
                    throw std::invalid_argument(fmt::format("encode_nifti: {} does not fit int16", value));
                }
                const auto s = static_cast<std::int16_t>(value);
                std::memcpy(dst + 2 * i, &s, 2);
                break;
            }
            case NiftiDatatype::Float32:
                std::memcpy(dst + 4 * i, &value, 4);
                break;
        }
    }
    return out;
}

Volume load_volume(const std::filesystem::path& path, VolumeKind kind) {
    const auto bytes = read_all(path);
    try {
        return decode_nifti(bytes, kind);
    } catch (const UnsupportedNiftiError&) {
        throw;
    } catch (const IoError& e) {
        throw IoError(fmt::format("'{}': {}", path.string(), e.what()));
    }
}

void write_volume(const std::filesystem::path& path, const Volume& v, std::optional<NiftiDatatype> datatype) {
    const auto bytes = encode_nifti(v, datatype);
    if (path.extension() == ".gz") {
        gzFile file = gzopen(path.string().c_str(), "wb6");
        if (file == nullptr) {
            throw IoError(fmt::format("cannot create '{}'", path.string()));
        }
        const int written = gzwrite(file, bytes.data(), static_cast<unsigned>(bytes.size()));
        const int closed = gzclose(file);
        if (written != static_cast<int>(bytes.size()) || closed != Z_OK) {
            throw IoError(fmt::format("writing '{}' failed", path.string()));
        }
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError(fmt::format("writing '{}' failed", path.string()));
    }
}

}  // namespace promptseg
