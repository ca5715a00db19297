// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "promptseg/config.hpp"

namespace promptseg {

struct ManifestScan {
    Manifest manifest;
    std::vector<std::string> warnings;
};

/// Builds a manifest from a BraTS-style tree. Every directory holding a
/// `*_t1ce.nii[.gz]` and a `*_seg.nii[.gz]` file becomes a case named after
/// the directory. The grade comes from an `HGG`/`LGG` ancestor folder, or
/// else from `name_mapping.csv` at the root. Paths are stored relative to
/// the root; cases are sorted by id.
ManifestScan scan_brats_dataset(const std::filesystem::path& root);

}  // namespace promptseg
