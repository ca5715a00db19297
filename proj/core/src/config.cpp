// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/config.hpp"

#include <cstdlib>
#include <fstream>

#include <fmt/format.h>
#include <sodium.h>

#include "promptseg/errors.hpp"
#include "promptseg/nifti.hpp"

namespace promptseg {

namespace {

namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

template <typename T>
T typed(const nlohmann::json& j, const std::string& field) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(fmt::format("{}: wrong type ({})", field, j.type_name()));
    }
}

const nlohmann::json& array_field(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array()) {
        throw ConfigError(fmt::format("{}: expected an array", field));
    }
    if (j.empty()) {
        throw ConfigError(fmt::format("{}: must not be empty", field));
    }
    return j;
}

nlohmann::json read_json(const fs::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("{}: cannot open '{}'", what, path.string()));
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("{}: '{}' is not valid JSON: {}", what, path.string(), e.what()));
    }
}

}  // namespace

const CaseEntry* Manifest::find(const std::string& id) const {
    for (const auto& c : cases) {
        if (c.id == id) {
            return &c;
        }
    }
    return nullptr;
}

Manifest parse_manifest(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("cases")) {
        throw ConfigError("manifest: expected an object with a 'cases' array");
    }
    Manifest manifest;
    std::set<std::string> seen;
    const auto& cases = j.at("cases");
    if (!cases.is_array()) {
        throw ConfigError("manifest.cases: expected an array");
    }
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        const auto where = fmt::format("manifest.cases[{}]", i);
        for (const char* key : {"id", "intensity", "labels"}) {
            if (!c.contains(key) || !c.at(key).is_string()) {
                throw ConfigError(fmt::format("{}.{}: required string", where, key));
            }
        }
        CaseEntry entry{c.at("id").get<std::string>(), c.at("intensity").get<std::string>(),
                        c.at("labels").get<std::string>(), Grade::Unknown};
        if (c.contains("grade")) {
            try {
                entry.grade = parse_grade(typed<std::string>(c.at("grade"), where + ".grade"));
            } catch (const ConfigError& e) {
                throw ConfigError(fmt::format("{}.grade: {}", where, e.what()));
            }
        }
        if (!seen.insert(entry.id).second) {
            throw ConfigError(fmt::format("{}.id: duplicate case id '{}'", where, entry.id));
        }
        manifest.cases.push_back(std::move(entry));
    }
    return manifest;
}

nlohmann::json manifest_json(const Manifest& manifest) {
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& c : manifest.cases) {
        cases.push_back({{"id", c.id},
                         {"intensity", c.intensity.generic_string()},
                         {"labels", c.labels.generic_string()},
                         {"grade", to_string(c.grade)}});
    }
    return {{"cases", std::move(cases)}};
}

Manifest read_manifest(const fs::path& path) { return parse_manifest(read_json(path, "manifest")); }

void write_manifest(const fs::path& path, const Manifest& manifest) {
    std::ofstream out(path);
    out << manifest_json(manifest).dump(2) << '\n';
    if (!out) {
        throw IoError(fmt::format("writing '{}' failed", path.string()));
    }
}

CaseVolumes load_case(const fs::path& dataset_root, const CaseEntry& entry) {
    return {entry.id, entry.grade, load_volume(resolve(dataset_root, entry.intensity), VolumeKind::Intensity),
            load_volume(resolve(dataset_root, entry.labels), VolumeKind::Label)};
}

EvaluationSettings ExperimentConfig::evaluation_settings() const {
    return {core_labels, margin_mm, max_points, true};
}

ExperimentConfig parse_config(const nlohmann::json& j, const fs::path& base_dir, bool apply_environment) {
    if (!j.is_object()) {
        throw ConfigError("config: expected a JSON object");
    }
    static const std::set<std::string> known{"dataset_root", "manifest",  "policies",    "orientations",
                                             "cropped",      "backend",   "max_points",  "margin_mm",
                                             "core_labels",  "output_dir", "parallelism"};
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError(fmt::format("{}: unknown config key", key));
        }
    }

    ExperimentConfig config;
    std::string dataset_root = j.contains("dataset_root") ? typed<std::string>(j.at("dataset_root"), "dataset_root") : "";
    if (apply_environment) {
        if (const char* env = std::getenv("PROMPTSEG_DATA"); env != nullptr && *env != '\0') {
            dataset_root = env;
        }
    }
    if (dataset_root.empty()) {
        throw ConfigError("dataset_root: required (or set PROMPTSEG_DATA)");
    }
    config.dataset_root = resolve(base_dir, dataset_root);
    if (!fs::is_directory(config.dataset_root)) {
        throw ConfigError(fmt::format("dataset_root: '{}' is not a directory", config.dataset_root.string()));
    }

    const std::string manifest = j.contains("manifest") ? typed<std::string>(j.at("manifest"), "manifest") : "manifest.json";
    config.manifest_path = resolve(config.dataset_root, manifest);
    if (!fs::is_regular_file(config.manifest_path)) {
        throw ConfigError(fmt::format("manifest: '{}' does not exist", config.manifest_path.string()));
    }
    config.manifest = read_manifest(config.manifest_path);
    if (config.manifest.cases.empty()) {
        throw ConfigError("manifest.cases: no cases listed");
    }
    for (const auto& c : config.manifest.cases) {
        for (const auto& p : {c.intensity, c.labels}) {
            if (!fs::is_regular_file(resolve(config.dataset_root, p))) {
                throw ConfigError(
                    fmt::format("manifest case '{}': file '{}' does not exist", c.id, resolve(config.dataset_root, p).string()));
            }
        }
    }

    if (j.contains("policies")) {
        config.policies.clear();
        for (const auto& p : array_field(j.at("policies"), "policies")) {
            try {
                config.policies.push_back(parse_policy(typed<std::string>(p, "policies")));
            } catch (const ConfigError& e) {
                throw ConfigError(fmt::format("policies: {}", e.what()));
            }
        }
    }
    if (j.contains("orientations")) {
        config.orientations.clear();
        for (const auto& o : array_field(j.at("orientations"), "orientations")) {
            try {
                config.orientations.push_back(parse_orientation(typed<std::string>(o, "orientations")));
            } catch (const ConfigError& e) {
                throw ConfigError(fmt::format("orientations: {}", e.what()));
            }
        }
    }
    if (j.contains("cropped")) {
        config.cropped.clear();
        const auto& cropped = j.at("cropped");
        if (cropped.is_boolean()) {
            config.cropped.push_back(cropped.get<bool>());
        } else {
            for (const auto& c : array_field(cropped, "cropped")) {
                config.cropped.push_back(typed<bool>(c, "cropped"));
            }
        }
    }

    if (j.contains("max_points")) {
        config.max_points = typed<int>(j.at("max_points"), "max_points");
    }
    if (config.max_points < 1 || config.max_points > kMaxPromptBudget) {
        throw ConfigError(fmt::format("max_points: {} outside [1, {}]", config.max_points, kMaxPromptBudget));
    }
    if (j.contains("margin_mm")) {
        config.margin_mm = typed<double>(j.at("margin_mm"), "margin_mm");
    }
    if (config.margin_mm < 0.0) {
        throw ConfigError("margin_mm: must be non-negative");
    }
    if (j.contains("core_labels")) {
        config.core_labels.clear();
        for (const auto& l : array_field(j.at("core_labels"), "core_labels")) {
            config.core_labels.insert(typed<int>(l, "core_labels"));
        }
    }
    if (j.contains("output_dir")) {
        config.output_dir = typed<std::string>(j.at("output_dir"), "output_dir");
    }
    config.output_dir = resolve(base_dir, config.output_dir);
    if (j.contains("parallelism")) {
        config.parallelism = typed<int>(j.at("parallelism"), "parallelism");
    }
    if (config.parallelism < 1) {
        throw ConfigError("parallelism: must be at least 1");
    }

    if (j.contains("backend")) {
        const auto& b = j.at("backend");
        if (!b.is_object()) {
            throw ConfigError("backend: expected an object");
        }
        if (b.contains("kind")) {
            config.backend.kind = parse_backend_kind(typed<std::string>(b.at("kind"), "backend.kind"));
        }
        if (b.contains("endpoint")) {
            config.backend.endpoint = typed<std::string>(b.at("endpoint"), "backend.endpoint");
        }
        if (b.contains("timeout_s")) {
            config.backend.timeout_s = typed<double>(b.at("timeout_s"), "backend.timeout_s");
        }
        if (b.contains("pool_size")) {
            config.backend.pool_size = typed<int>(b.at("pool_size"), "backend.pool_size");
        }
        if (b.contains("tolerances")) {
            const auto levels = typed<std::vector<int>>(b.at("tolerances"), "backend.tolerances");
            if (levels.size() != 3) {
                throw ConfigError("backend.tolerances: expected exactly 3 gray-level tolerances");
            }
            for (const int t : levels) {
                if (t < 0) {
                    throw ConfigError("backend.tolerances: must be non-negative");
                }
            }
            config.backend.tolerances.levels = {levels[0], levels[1], levels[2]};
        }
    }
    if (apply_environment) {
        if (const char* url = std::getenv("PROMPTSEG_BACKEND_URL"); url != nullptr && *url != '\0') {
            config.backend.kind = BackendKind::External;
            config.backend.endpoint = url;
        }
    }
    if (config.backend.kind == BackendKind::External && config.backend.endpoint.empty()) {
        throw ConfigError("backend.endpoint: required when backend.kind is external");
    }
    if (!(config.backend.timeout_s > 0.0)) {
        throw ConfigError("backend.timeout_s: must be positive");
    }
    if (config.backend.pool_size < 1) {
        throw ConfigError("backend.pool_size: must be at least 1");
    }
    return config;
}

ExperimentConfig load_config(const fs::path& path, bool apply_environment) {
    return parse_config(read_json(path, "config"), fs::absolute(path).parent_path(), apply_environment);
}

nlohmann::json canonical_config(const ExperimentConfig& config) {
    nlohmann::json policies = nlohmann::json::array();
    for (const auto p : config.policies) {
        policies.push_back(to_string(p));
    }
    nlohmann::json orientations = nlohmann::json::array();
    for (const auto o : config.orientations) {
        orientations.push_back(to_string(o));
    }
    nlohmann::json backend = {{"kind", to_string(config.backend.kind)}};
    if (config.backend.kind == BackendKind::Reference) {
        backend["tolerances"] = config.backend.tolerances.levels;
    }
    if (config.backend.kind == BackendKind::External) {
        backend["endpoint"] = config.backend.endpoint;
    }
    return {
        {"dataset_root", fs::weakly_canonical(config.dataset_root).generic_string()},
        {"manifest", manifest_json(config.manifest)},
        {"policies", policies},
        {"orientations", orientations},
        {"cropped", config.cropped},
        {"backend", backend},
        {"max_points", config.max_points},
        {"margin_mm", config.margin_mm},
        {"core_labels", config.core_labels},
    };
}

std::string config_hash(const ExperimentConfig& config) {
    // nlohmann::json objects are key-sorted, so dump() is canonical.
    const std::string text = canonical_config(config).dump();
    std::array<unsigned char, crypto_generichash_BYTES> digest{};
    crypto_generichash(digest.data(), digest.size(), reinterpret_cast<const unsigned char*>(text.data()), text.size(),
                       nullptr, 0);
    std::string hex(digest.size() * 2 + 1, '\0');
    sodium_bin2hex(hex.data(), hex.size(), digest.data(), digest.size());
    hex.pop_back();
    return hex;
}

}  // namespace promptseg
