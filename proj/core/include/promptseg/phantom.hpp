// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

// Synthetic brain-tumor phantoms for tests, benchmarks and demos.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "promptseg/prompt_sim.hpp"

namespace promptseg {

struct PhantomSpec {
    std::string case_id = "phantom";
    Grade grade = Grade::HGG;
    Dims3 dims{96, 96, 96};
    Spacing3 spacing{1.0, 1.0, 1.0};
    /// Tumor center in voxels; negative components mean "grid center".
    std::array<double, 3> center{-1.0, -1.0, -1.0};
    double radius = 24.0;
    /// Cut a slot out of the sphere: voxels with x above the center and
    /// |y - cy| below a quarter radius are not tumor.
    bool notch = true;
    /// Fraction of the radius forming a necrotic (label 1) core; the rest is
    /// enhancing tumor (label 4). Zero gives an all-enhancing tumor.
    double necrotic_fraction = 0.0;
    double edema_thickness = 3.0;
    int tumor_intensity = 200;
    int necrotic_intensity = 200;
    int edema_intensity = 110;
    int brain_intensity = 70;
    /// Uniform integer noise in [-noise, noise], reproducible from `seed`.
    int noise = 3;
    std::uint32_t seed = 1;
};

/// Intensity + label volumes of an ellipsoidal "head" holding one notched
/// spherical tumor with an edema shell (labels: 1 necrotic, 2 edema,
/// 4 enhancing).
CaseVolumes make_phantom(const PhantomSpec& spec);

/// Writes `<case>_t1ce.nii.gz`, `<case>_seg.nii.gz` per case and a
/// `manifest.json` into `dir`. Returns the manifest path.
std::filesystem::path write_phantom_dataset(const std::filesystem::path& dir, const std::vector<PhantomSpec>& specs);

}  // namespace promptseg
