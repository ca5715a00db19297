// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/phantom.hpp"

#include <cmath>
#include <random>

#include "promptseg/config.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/nifti.hpp"

namespace promptseg {

CaseVolumes make_phantom(const PhantomSpec& spec) {
    const auto& d = spec.dims;
    std::array<double, 3> c{};
    for (int a = 0; a < 3; ++a) {
        c[a] = spec.center[a] < 0.0 ? (d[a] - 1) / 2.0 : spec.center[a];
    }
    Volume intensity(d, spec.spacing, VolumeKind::Intensity, 0.0f);
    Volume labels(d, spec.spacing, VolumeKind::Label, 0.0f);

    // Raw engine output keeps the noise identical across standard libraries.
    std::mt19937 engine(spec.seed);
    const auto span = static_cast<std::uint32_t>(2 * spec.noise + 1);

    for (int z = 0; z < d[2]; ++z) {
        for (int y = 0; y < d[1]; ++y) {
            for (int x = 0; x < d[0]; ++x) {
                const double dx = x - c[0];
                const double dy = y - c[1];
                const double dz = z - c[2];
                const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
                // Head: ellipsoid filling ~90% of the grid.
                const double hx = dx / (0.45 * d[0]);
                const double hy = dy / (0.45 * d[1]);
                const double hz = dz / (0.45 * d[2]);
                const bool head = hx * hx + hy * hy + hz * hz <= 1.0;
                const bool slot = spec.notch && dx > 0.0 && std::abs(dy) < spec.radius / 4.0;

                int value = 0;
                int label = 0;
                if (r <= spec.radius && !slot) {
                    if (r <= spec.radius * spec.necrotic_fraction) {
                        value = spec.necrotic_intensity;
                        label = 1;
                    } else {
                        value = spec.tumor_intensity;
                        label = 4;
                    }
                } else if (r <= spec.radius + spec.edema_thickness) {
                    value = spec.edema_intensity;
                    label = 2;
                } else if (head) {
                    value = spec.brain_intensity;
                }
                const auto draw = engine();
                if (value > 0 && spec.noise > 0) {
                    value += static_cast<int>(draw % span) - spec.noise;
                }
                intensity.set(x, y, z, static_cast<float>(std::max(value, 0)));
                labels.set(x, y, z, static_cast<float>(label));
            }
        }
    }
    return {spec.case_id, spec.grade, std::move(intensity), std::move(labels)};
}

std::filesystem::path write_phantom_dataset(const std::filesystem::path& dir, const std::vector<PhantomSpec>& specs) {
    std::filesystem::create_directories(dir);
    Manifest manifest;
    for (const auto& spec : specs) {
        const CaseVolumes volumes = make_phantom(spec);
        const std::string image = spec.case_id + "_t1ce.nii.gz";
        const std::string seg = spec.case_id + "_seg.nii.gz";
        write_volume(dir / image, volumes.intensity, NiftiDatatype::Int16);
        write_volume(dir / seg, volumes.labels, NiftiDatatype::UInt8);
        manifest.cases.push_back({spec.case_id, image, seg, spec.grade});
    }
    const auto path = dir / "manifest.json";
    write_manifest(path, manifest);
    return path;
}

}  // namespace promptseg
