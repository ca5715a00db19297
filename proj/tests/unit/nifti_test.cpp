// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/nifti.hpp"

namespace promptseg {
namespace {

// Hand-built single-file header, big or little endian.
class HeaderBuilder {
public:
    explicit HeaderBuilder(bool big_endian) : big_(big_endian), bytes_(352, 0) {
        put<std::int32_t>(0, 348);
        put<float>(108, 352.0f);
        std::memcpy(bytes_.data() + 344, "n+1\0", 4);
    }

    template <typename T>
    void put(std::size_t offset, T value) {
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        if (big_ == (std::endian::native == std::endian::little)) {
            std::reverse(raw, raw + sizeof(T));
        }
        std::memcpy(bytes_.data() + offset, raw, sizeof(T));
    }

    HeaderBuilder& dims(std::vector<std::int16_t> d) {
        for (std::size_t i = 0; i < d.size(); ++i) {
            put<std::int16_t>(40 + 2 * i, d[i]);
        }
        return *this;
    }
    HeaderBuilder& datatype(std::int16_t code, std::int16_t bitpix) {
        put<std::int16_t>(70, code);
        put<std::int16_t>(72, bitpix);
        return *this;
    }
    HeaderBuilder& pixdim(float x, float y, float z) {
        put<float>(80, x);
        put<float>(84, y);
        put<float>(88, z);
        return *this;
    }
    HeaderBuilder& scale(float slope, float inter) {
        put<float>(112, slope);
        put<float>(116, inter);
        return *this;
    }
    template <typename T>
    HeaderBuilder& voxel(T value) {
        const std::size_t at = bytes_.size();
        bytes_.resize(at + sizeof(T));
        put<T>(at, value);
        return *this;
    }
    std::vector<std::uint8_t> bytes() const { return bytes_; }

private:
    bool big_;
    std::vector<std::uint8_t> bytes_;
};

TEST(Nifti, DecodesBigEndianInt16) {
    HeaderBuilder h(true);
    h.dims({3, 2, 1, 2, 1, 1, 1, 1}).datatype(4, 16).pixdim(0.5f, 1.5f, 3.0f);
    for (const std::int16_t v : {-3, 7, 300, 12}) {
        h.voxel(v);
    }
    const auto vol = decode_nifti(h.bytes());
    EXPECT_EQ(vol.dims(), (Dims3{2, 1, 2}));
    EXPECT_EQ(vol.spacing(), (Spacing3{0.5, 1.5, 3.0}));
    EXPECT_EQ(vol.data(), (std::vector<float>{-3, 7, 300, 12}));
}

TEST(Nifti, AppliesScaling) {
    HeaderBuilder h(false);
    h.dims({3, 2, 1, 1}).datatype(2, 8).pixdim(1, 1, 1).scale(2.0f, -1.0f).voxel<std::uint8_t>(3).voxel<std::uint8_t>(10);
    EXPECT_EQ(decode_nifti(h.bytes()).data(), (std::vector<float>{5.0f, 19.0f}));
}

TEST(Nifti, AcceptsSingletonTimeAxis) {
    HeaderBuilder h(false);
    h.dims({4, 1, 1, 1, 1}).datatype(16, 32).pixdim(1, 1, 1).voxel(2.5f);
    EXPECT_EQ(decode_nifti(h.bytes()).data(), (std::vector<float>{2.5f}));
}

TEST(Nifti, RejectsUnsupportedFeatures) {
    HeaderBuilder four_d(false);
    four_d.dims({4, 1, 1, 1, 3}).datatype(2, 8).pixdim(1, 1, 1);
    try {
        decode_nifti(four_d.bytes());
        FAIL() << "4D image accepted";
    } catch (const UnsupportedNiftiError& e) {
        EXPECT_EQ(e.field(), "dim[4]");
    }
    HeaderBuilder float64(false);
    float64.dims({3, 1, 1, 1}).datatype(64, 64).pixdim(1, 1, 1);
    EXPECT_THROW(decode_nifti(float64.bytes()), UnsupportedNiftiError);

    auto pair = HeaderBuilder(false).dims({3, 1, 1, 1}).datatype(2, 8).bytes();
    std::memcpy(pair.data() + 344, "ni1\0", 4);
    EXPECT_THROW(decode_nifti(pair), UnsupportedNiftiError);
}

TEST(Nifti, TruncatedDataIsAnIoError) {
    HeaderBuilder h(false);
    h.dims({3, 2, 2, 2}).datatype(2, 8).pixdim(1, 1, 1).voxel<std::uint8_t>(1);
    EXPECT_THROW(decode_nifti(h.bytes()), IoError);
    EXPECT_THROW(decode_nifti(std::vector<std::uint8_t>(100, 0)), IoError);
}

TEST(Nifti, EncodeDecodeRoundTripPerDatatype) {
    Volume labels({3, 4, 5}, {1.0, 0.875, 2.5}, VolumeKind::Label);
    Volume signed_values({3, 4, 5}, {1.0, 1.0, 1.0}, VolumeKind::Intensity);
    Volume reals({3, 4, 5}, {1.0, 1.0, 1.0}, VolumeKind::Intensity);
    for (std::size_t i = 0; i < labels.voxel_count(); ++i) {
        labels.mutable_data()[i] = static_cast<float>(i % 5);
        signed_values.mutable_data()[i] = static_cast<float>(static_cast<int>(i) * 97 - 2000);
        reals.mutable_data()[i] = static_cast<float>(i) * 0.37f;
    }
    EXPECT_EQ(smallest_lossless_datatype(labels), NiftiDatatype::UInt8);
    EXPECT_EQ(smallest_lossless_datatype(signed_values), NiftiDatatype::Int16);
    EXPECT_EQ(smallest_lossless_datatype(reals), NiftiDatatype::Float32);
    for (const auto* v : {&labels, &signed_values, &reals}) {
        const auto back = decode_nifti(encode_nifti(*v), v->kind());
        EXPECT_EQ(back, *v);
    }
    EXPECT_THROW(encode_nifti(signed_values, NiftiDatatype::UInt8), std::invalid_argument);
}

TEST(Nifti, FilesWithAndWithoutCompression) {
    testing::TempDir dir;
    Volume v({8, 6, 4}, {1.0, 1.0, 2.0}, VolumeKind::Label);
    v.set(3, 2, 1, 4.0f);
    write_volume(dir / "a.nii", v);
    write_volume(dir / "a.nii.gz", v);
    EXPECT_EQ(load_volume(dir / "a.nii", VolumeKind::Label), v);
    EXPECT_EQ(load_volume(dir / "a.nii.gz", VolumeKind::Label), v);
    EXPECT_LT(std::filesystem::file_size(dir / "a.nii.gz"), std::filesystem::file_size(dir / "a.nii"));
    EXPECT_THROW(load_volume(dir / "missing.nii"), IoError);
    std::ofstream(dir / "junk.nii.gz") << "not gzip and not nifti";
    EXPECT_THROW(load_volume(dir / "junk.nii.gz"), Error);
}

}  // namespace
}  // namespace promptseg
