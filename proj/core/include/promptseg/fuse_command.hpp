// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptseg/config.hpp"
#include "promptseg/fusion.hpp"
#include "promptseg/prompt_sim.hpp"

namespace promptseg {

struct FuseOptions {
    PolicyKind policy = PolicyKind::Oracle;
    bool cropped = false;
    std::set<int> core_labels = kDefaultCoreLabels;
    /// When set, fused segmentations are written here as uint8 NIfTI.
    std::optional<std::filesystem::path> export_dir;
};

struct CaseFusion {
    std::string case_id;
    std::map<Orientation, double> dice;
    std::optional<double> dice_majority;
    std::vector<std::string> warnings;
};

struct FusionReport {
    std::vector<CaseFusion> cases;
    std::vector<std::string> warnings;
};

/// Per-slice final masks of one case and orientation placed back into the
/// source grid. Cropped records are stacked in their crop window first.
StackedSegmentation stack_records(const Dims3& dims, const Spacing3& spacing, Orientation orientation,
                                  const std::vector<const EvalRecord*>& records);

/// Stacks the records' final masks per case and orientation, scores each
/// stack against the full 3D tumor core and, when all three orientations
/// exist, the majority vote.
FusionReport fuse_records(const std::vector<EvalRecord>& records, const std::filesystem::path& dataset_root,
                          const Manifest& manifest, const FuseOptions& options = {});

/// `{"cases": [{case_id, dice_axial, dice_sagittal, dice_coronal, dice_majority}], "warnings": [..]}`;
/// keys for missing orientations are omitted.
nlohmann::json to_json(const FusionReport& report);
std::string to_markdown(const FusionReport& report);

}  // namespace promptseg
