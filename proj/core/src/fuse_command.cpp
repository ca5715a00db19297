// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/fuse_command.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "promptseg/errors.hpp"
#include "promptseg/nifti.hpp"

namespace promptseg {

namespace {

const char* dice_key(Orientation o) {
    switch (o) {
        case Orientation::Transversal:
            return "dice_axial";
        case Orientation::Coronal:
            return "dice_coronal";
        case Orientation::Sagittal:
            return "dice_sagittal";
    }
    return "dice_axial";
}

}  // namespace

StackedSegmentation stack_records(const Dims3& dims, const Spacing3& spacing, Orientation orientation,
                                  const std::vector<const EvalRecord*>& records) {
    std::optional<Roi3D> roi;
    std::vector<SliceMask> slices;
    for (const auto* r : records) {
        if (r->failed || !r->final_mask) {
            continue;
        }
        if (r->roi != roi && !slices.empty()) {
            throw std::invalid_argument("stack_records: records of one case use different crop windows");
        }
        roi = r->roi;
        const int offset = roi ? roi->min[fixed_axis(orientation)] : 0;
        slices.emplace_back(r->slice_index - offset, *r->final_mask);
    }
    if (!roi) {
        return stack_slices(dims, spacing, orientation, slices);
    }

    const StackedSegmentation local = stack_slices(roi->extent(), spacing, orientation, slices);
    StackedSegmentation full{orientation, Volume(dims, spacing, VolumeKind::Label, 0.0f), {}};
    for (const int k : local.covered_slices) {
        full.covered_slices.insert(k + roi->min[fixed_axis(orientation)]);
    }
    const auto extent = roi->extent();
    for (int z = 0; z < extent[2]; ++z) {
        for (int y = 0; y < extent[1]; ++y) {
            for (int x = 0; x < extent[0]; ++x) {
                if (local.volume.at(x, y, z) != 0.0f) {
                    full.volume.set(x + roi->min[0], y + roi->min[1], z + roi->min[2], 1.0f);
                }
            }
        }
    }
    return full;
}

FusionReport fuse_records(const std::vector<EvalRecord>& records, const std::filesystem::path& dataset_root,
                          const Manifest& manifest, const FuseOptions& options) {
    std::map<std::string, std::map<Orientation, std::vector<const EvalRecord*>>> grouped;
    std::size_t missing_masks = 0;
    for (const auto& r : records) {
        if (r.policy != options.policy || r.cropped != options.cropped) {
            continue;
        }
        if (!r.failed && !r.final_mask) {
            ++missing_masks;
            continue;
        }
        grouped[r.case_id][r.orientation].push_back(&r);
    }

    FusionReport report;
    if (missing_masks > 0) {
        report.warnings.push_back(fmt::format("{} records carry no final mask and were skipped", missing_masks));
    }
    if (grouped.empty()) {
        report.warnings.push_back(fmt::format("no records for policy {} ({} slices)", to_string(options.policy),
                                              options.cropped ? "cropped" : "full"));
    }
    if (options.export_dir) {
        std::filesystem::create_directories(*options.export_dir);
    }

    for (const auto& [case_id, by_orientation] : grouped) {
        const CaseEntry* entry = manifest.find(case_id);
        if (entry == nullptr) {
            report.warnings.push_back(fmt::format("case '{}' is not in the manifest; skipped", case_id));
            continue;
        }
        const Volume labels = load_volume(
            entry->labels.is_absolute() ? entry->labels : dataset_root / entry->labels, VolumeKind::Label);
        const Volume gt = tumor_core_mask(labels, options.core_labels);

        CaseFusion fusion;
        fusion.case_id = case_id;
        std::map<Orientation, Volume> stacks;
        for (const auto& [orientation, rows] : by_orientation) {
            auto stacked = stack_records(gt.dims(), gt.spacing(), orientation, rows);
            fusion.dice[orientation] = volumetric_dice(stacked.volume, gt);
            if (options.export_dir) {
                write_volume(*options.export_dir / fmt::format("{}_{}.nii.gz", case_id, to_string(orientation)),
                             stacked.volume, NiftiDatatype::UInt8);
            }
            stacks.emplace(orientation, std::move(stacked.volume));
        }
        if (stacks.size() == 3) {
            const Volume fused = majority_vote(stacks.at(Orientation::Transversal), stacks.at(Orientation::Coronal),
                                               stacks.at(Orientation::Sagittal));
            fusion.dice_majority = volumetric_dice(fused, gt);
            if (options.export_dir) {
                write_volume(*options.export_dir / fmt::format("{}_majority.nii.gz", case_id), fused,
                             NiftiDatatype::UInt8);
            }
        } else {
            fusion.warnings.push_back(
                fmt::format("case '{}': {} of 3 orientations present; majority vote omitted", case_id, stacks.size()));
        }
        report.cases.push_back(std::move(fusion));
    }
    return report;
}

nlohmann::json to_json(const FusionReport& report) {
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& c : report.cases) {
        nlohmann::json row = {{"case_id", c.case_id}};
        for (const auto& [orientation, value] : c.dice) {
            row[dice_key(orientation)] = value;
        }
        if (c.dice_majority) {
            row["dice_majority"] = *c.dice_majority;
        }
        if (!c.warnings.empty()) {
            row["warnings"] = c.warnings;
        }
        cases.push_back(std::move(row));
    }
    return {{"cases", std::move(cases)}, {"warnings", report.warnings}};
}

std::string to_markdown(const FusionReport& report) {
    std::ostringstream md;
    const bool majority = std::any_of(report.cases.begin(), report.cases.end(),
                                      [](const CaseFusion& c) { return c.dice_majority.has_value(); });
    md << "# Volumetric Dice\n\n| Case | Axial | Coronal | Sagittal |" << (majority ? " Majority |" : "") << "\n|---|---|---|---|"
       << (majority ? "---|" : "") << "\n";
    auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : std::string("–"); };
    for (const auto& c : report.cases) {
        auto get = [&](Orientation o) -> std::optional<double> {
            const auto it = c.dice.find(o);
            return it == c.dice.end() ? std::nullopt : std::optional<double>(it->second);
        };
        md << fmt::format("| {} | {} | {} | {} |", c.case_id, cell(get(Orientation::Transversal)),
                          cell(get(Orientation::Coronal)), cell(get(Orientation::Sagittal)));
        if (majority) {
            md << ' ' << cell(c.dice_majority) << " |";
        }
        md << '\n';
    }
    std::vector<std::string> warnings = report.warnings;
    for (const auto& c : report.cases) {
        warnings.insert(warnings.end(), c.warnings.begin(), c.warnings.end());
    }
    if (!warnings.empty()) {
        md << "\n## Warnings\n\n";
        for (const auto& w : warnings) {
            md << "- " << w << '\n';
        }
    }
    return md.str();
}

}  // namespace promptseg
