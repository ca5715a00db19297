// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptseg/prompt_sim.hpp"
#include "promptseg/segmenter.hpp"

namespace promptseg {

/// One dataset case. Paths are relative to the dataset root unless absolute.
struct CaseEntry {
    std::string id;
    std::filesystem::path intensity;
    std::filesystem::path labels;
    Grade grade = Grade::Unknown;
};

/// `{"cases":[{"id":..,"intensity":..,"labels":..,"grade":"HGG"|"LGG"}]}`
struct Manifest {
    std::vector<CaseEntry> cases;

    const CaseEntry* find(const std::string& id) const;
};

Manifest parse_manifest(const nlohmann::json& j);
nlohmann::json manifest_json(const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Loads the intensity and label volumes of one case.
CaseVolumes load_case(const std::filesystem::path& dataset_root, const CaseEntry& entry);

struct ExperimentConfig {
    std::filesystem::path dataset_root;
    std::filesystem::path manifest_path;
    Manifest manifest;
    std::vector<PolicyKind> policies{PolicyKind::Oracle};
    std::vector<Orientation> orientations{Orientation::Transversal};
    std::vector<bool> cropped{false};
    BackendConfig backend;
    int max_points = kMaxPromptBudget;
    double margin_mm = 20.0;
    std::set<int> core_labels = kDefaultCoreLabels;
    std::filesystem::path output_dir{"promptseg-out"};
    int parallelism = 1;

    EvaluationSettings evaluation_settings() const;
};

/// Parses and validates a config document. Relative paths resolve against
/// `base_dir`. Environment overrides: PROMPTSEG_DATA replaces the dataset
/// root, PROMPTSEG_BACKEND_URL selects the external backend at that URL.
/// Throws ConfigError with a field-level message.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                              bool apply_environment = true);
ExperimentConfig load_config(const std::filesystem::path& path, bool apply_environment = true);

/// Canonical JSON of every setting that influences record content.
nlohmann::json canonical_config(const ExperimentConfig& config);

/// BLAKE2b-256 of the canonical config, hex encoded.
std::string config_hash(const ExperimentConfig& config);

}  // namespace promptseg
