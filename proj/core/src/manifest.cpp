// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace {

namespace fs = std::filesystem;

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool has_modality(const std::string& filename, std::string_view modality) {
    const std::string name = lower(filename);
    for (const auto ext : {".nii", ".nii.gz"}) {
        if (ends_with(name, std::string("_") + std::string(modality) + ext)) {
            return true;
        }
    }
    return false;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
            cell.pop_back();
        }
        cells.push_back(cell);
    }
    return cells;
}

// Maps every subject id found in any column to the row's grade.
std::map<std::string, Grade> read_name_mapping(const fs::path& path) {
    std::map<std::string, Grade> grades;
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line)) {
        return grades;
    }
    const auto header = split_csv_line(line);
    const auto grade_col = std::find_if(header.begin(), header.end(),
                                        [](const std::string& h) { return lower(h) == "grade"; });
    if (grade_col == header.end()) {
        throw ConfigError(fmt::format("'{}' has no Grade column", path.string()));
    }
    const auto g = static_cast<std::size_t>(grade_col - header.begin());
    while (std::getline(in, line)) {
        const auto cells = split_csv_line(line);
        if (cells.size() <= g) {
            continue;
        }
        Grade grade = Grade::Unknown;
        try {
            grade = parse_grade(cells[g]);
        } catch (const std::exception&) {
            continue;
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c != g && !cells[c].empty() && lower(cells[c]) != "na") {
                grades.emplace(cells[c], grade);
            }
        }
    }
    return grades;
}

std::optional<Grade> grade_from_path(const fs::path& relative) {
    for (const auto& part : relative) {
        const std::string name = lower(part.string());
        if (name == "hgg") {
            return Grade::HGG;
        }
        if (name == "lgg") {
            return Grade::LGG;
        }
    }
    return std::nullopt;
}

}  // namespace

ManifestScan scan_brats_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) {
        throw IoError(fmt::format("dataset root '{}' is not a directory", root.string()));
    }
    std::map<std::string, Grade> mapping;
    if (const auto csv = root / "name_mapping.csv"; fs::exists(csv)) {
        mapping = read_name_mapping(csv);
    }

    std::map<fs::path, std::pair<std::vector<fs::path>, std::vector<fs::path>>> by_dir;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const std::string name = entry.path().filename().string();
        if (has_modality(name, "t1ce")) {
            by_dir[entry.path().parent_path()].first.push_back(entry.path());
        } else if (has_modality(name, "seg")) {
            by_dir[entry.path().parent_path()].second.push_back(entry.path());
        }
    }

    ManifestScan scan;
    std::map<std::string, fs::path> seen;
    for (auto& [dir, files] : by_dir) {
        const auto relative_dir = fs::relative(dir, root);
        const std::string id = dir == root ? std::string() : dir.filename().string();
        if (files.first.size() != 1 || files.second.size() != 1) {
            scan.warnings.push_back(fmt::format("'{}': expected one t1ce and one seg file, found {} and {}; skipped",
                                                relative_dir.string(), files.first.size(), files.second.size()));
            continue;
        }
        if (id.empty()) {
            scan.warnings.push_back("image files directly in the dataset root are ignored");
            continue;
        }
        if (const auto [it, inserted] = seen.emplace(id, relative_dir); !inserted) {
            scan.warnings.push_back(fmt::format("duplicate case id '{}' in '{}' and '{}'; the second was skipped", id,
                                                it->second.string(), relative_dir.string()));
            continue;
        }
        Grade grade = Grade::Unknown;
        if (const auto from_path = grade_from_path(relative_dir)) {
            grade = *from_path;
        } else if (const auto it = mapping.find(id); it != mapping.end()) {
            grade = it->second;
        } else {
            scan.warnings.push_back(fmt::format("case '{}': grade unknown", id));
        }
        scan.manifest.cases.push_back(
            {id, fs::relative(files.first.front(), root), fs::relative(files.second.front(), root), grade});
    }
    std::sort(scan.manifest.cases.begin(), scan.manifest.cases.end(),
              [](const CaseEntry& a, const CaseEntry& b) { return a.id < b.id; });
    return scan;
}

}  // namespace promptseg
