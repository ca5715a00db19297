// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/manifest.hpp"

namespace promptseg {
namespace {

namespace fs = std::filesystem;

void touch_case(const fs::path& dir, const std::string& id, bool gz = true) {
    fs::create_directories(dir / id);
    const std::string ext = gz ? ".nii.gz" : ".nii";
    for (const char* modality : {"_t1.", "_t1ce.", "_t2.", "_flair.", "_seg."}) {
        std::string name = id + modality;
        name.pop_back();
        std::ofstream(dir / id / (name + ext)) << "x";
    }
}

TEST(ManifestScan, GradeFromFolders) {
    testing::TempDir root;
    touch_case(root / "HGG", "Brats18_A_1");
    touch_case(root / "LGG", "Brats18_B_2", false);
    touch_case(root / "hgg", "Brats18_C_3");
    const auto scan = scan_brats_dataset(root.path());
    ASSERT_EQ(scan.manifest.cases.size(), 3u);
    EXPECT_TRUE(scan.warnings.empty());
    const auto& a = scan.manifest.cases[0];
    EXPECT_EQ(a.id, "Brats18_A_1");
    EXPECT_EQ(a.grade, Grade::HGG);
    EXPECT_EQ(a.intensity, fs::path("HGG/Brats18_A_1/Brats18_A_1_t1ce.nii.gz"));
    EXPECT_EQ(a.labels, fs::path("HGG/Brats18_A_1/Brats18_A_1_seg.nii.gz"));
    EXPECT_EQ(scan.manifest.cases[1].grade, Grade::LGG);
    EXPECT_EQ(scan.manifest.cases[1].intensity.extension(), ".nii");
    EXPECT_EQ(scan.manifest.cases[2].grade, Grade::HGG);
}

TEST(ManifestScan, GradeFromNameMapping) {
    testing::TempDir root;
    touch_case(root / "train", "BraTS20_Training_001");
    touch_case(root / "train", "BraTS20_Training_002");
    touch_case(root / "train", "BraTS20_Training_003");
    std::ofstream(root / "name_mapping.csv") << "Grade,BraTS_2017_subject_ID,BraTS_2020_subject_ID\n"
                                                "HGG,Brats17_x,BraTS20_Training_001\n"
                                                "LGG,NA,BraTS20_Training_002\n";
    const auto scan = scan_brats_dataset(root.path());
    ASSERT_EQ(scan.manifest.cases.size(), 3u);
    EXPECT_EQ(scan.manifest.cases[0].grade, Grade::HGG);
    EXPECT_EQ(scan.manifest.cases[1].grade, Grade::LGG);
    EXPECT_EQ(scan.manifest.cases[2].grade, Grade::Unknown);
    ASSERT_EQ(scan.warnings.size(), 1u);
    EXPECT_NE(scan.warnings[0].find("BraTS20_Training_003"), std::string::npos);
}

TEST(ManifestScan, IncompleteAndDuplicateCasesWarn) {
    testing::TempDir root;
    touch_case(root / "HGG", "dup");
    touch_case(root / "LGG", "dup");
    fs::create_directories(root / "HGG" / "partial");
    std::ofstream(root / "HGG" / "partial" / "partial_t1ce.nii.gz") << "x";
    const auto scan = scan_brats_dataset(root.path());
    EXPECT_EQ(scan.manifest.cases.size(), 1u);
    EXPECT_EQ(scan.warnings.size(), 2u);
    EXPECT_THROW(scan_brats_dataset(root / "missing"), IoError);
}

TEST(ManifestScan, ResultLoadsAsAManifest) {
    testing::TempDir root;
    touch_case(root / "HGG", "c1");
    const auto scan = scan_brats_dataset(root.path());
    write_manifest(root / "manifest.json", scan.manifest);
    const auto back = read_manifest(root / "manifest.json");
    ASSERT_EQ(back.cases.size(), 1u);
    EXPECT_EQ(back.cases[0].intensity, scan.manifest.cases[0].intensity);
    EXPECT_EQ(back.cases[0].grade, Grade::HGG);
}

}  // namespace
}  // namespace promptseg
