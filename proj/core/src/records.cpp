// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/records.hpp"

#include <algorithm>
#include <fstream>
#include <string>
#include <tuple>

#include <fmt/format.h>

#include "promptseg/errors.hpp"

namespace promptseg {

void to_json(nlohmann::json& j, const EvalRecord& r) {
    j = nlohmann::json{
        {"case_id", r.case_id},
        {"grade", to_string(r.grade)},
        {"orientation", to_string(r.orientation)},
        {"slice_index", r.slice_index},
        {"policy", to_string(r.policy)},
        {"cropped", r.cropped},
        {"gt_area_mm2", r.gt_area_mm2},
        {"best_iou", r.best_iou},
        {"best_step", r.best_step},
        {"n_steps", r.n_steps},
        {"step_ious", r.step_ious},
        {"failed", r.failed},
    };
    if (!r.error.empty()) {
        j["error"] = r.error;
    }
    if (r.oracle_seeded) {
        j["oracle_seeded"] = true;
    }
    if (r.roi) {
        j["roi"] = {{"min", r.roi->min}, {"max", r.roi->max}};
    }
    if (r.final_mask) {
        j["final_mask"] = rle_encode(*r.final_mask);
    }
}

void from_json(const nlohmann::json& j, EvalRecord& r) {
    r.case_id = j.at("case_id").get<std::string>();
    r.grade = parse_grade(j.at("grade").get<std::string>());
    r.orientation = parse_orientation(j.at("orientation").get<std::string>());
    r.slice_index = j.at("slice_index").get<int>();
    r.policy = parse_policy(j.at("policy").get<std::string>());
    r.cropped = j.at("cropped").get<bool>();
    r.gt_area_mm2 = j.at("gt_area_mm2").get<double>();
    r.best_iou = j.at("best_iou").get<double>();
    r.best_step = j.at("best_step").get<int>();
    r.n_steps = j.at("n_steps").get<int>();
    r.step_ious = j.at("step_ious").get<std::vector<double>>();
    r.failed = j.at("failed").get<bool>();
    r.error = j.value("error", std::string{});
    r.oracle_seeded = j.value("oracle_seeded", false);
    r.roi.reset();
    if (j.contains("roi")) {
        r.roi = Roi3D{j.at("roi").at("min").get<Index3>(), j.at("roi").at("max").get<Index3>()};
    }
    r.final_mask.reset();
    if (j.contains("final_mask")) {
        r.final_mask = rle_decode(j.at("final_mask").get<RleMask>());
    }
}

void sort_records(std::vector<EvalRecord>& records) {
    std::stable_sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
        return std::forward_as_tuple(a.case_id, a.orientation, a.slice_index, a.policy, a.cropped) <
               std::forward_as_tuple(b.case_id, b.orientation, b.slice_index, b.policy, b.cropped);
    });
}

void write_jsonl(std::ostream& out, const std::vector<EvalRecord>& records) {
    for (const auto& r : records) {
        out << nlohmann::json(r).dump() << '\n';
    }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    write_jsonl(out, records);
    if (!out) {
        throw IoError(fmt::format("writing '{}' failed", path.string()));
    }
}

std::vector<EvalRecord> read_jsonl(std::istream& in) {
    std::vector<EvalRecord> records;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            records.push_back(nlohmann::json::parse(line).get<EvalRecord>());
        } catch (const nlohmann::json::exception& e) {
            throw IoError(fmt::format("record line {}: {}", number, e.what()));
        } catch (const Error& e) {
            throw IoError(fmt::format("record line {}: {}", number, e.what()));
        }
    }
    return records;
}

std::vector<EvalRecord> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open '{}'", path.string()));
    }
    return read_jsonl(in);
}

void write_csv(std::ostream& out, const std::vector<EvalRecord>& records) {
    out << "case_id,grade,orientation,slice_index,policy,cropped,gt_area_mm2,best_iou,best_step,n_steps";
    for (int i = 1; i <= kMaxPromptBudget; ++i) {
        out << ",iou_step_" << i;
    }
    out << ",failed\n";
    for (const auto& r : records) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{}", r.case_id, to_string(r.grade), to_string(r.orientation),
                           r.slice_index, to_string(r.policy), r.cropped ? 1 : 0, r.gt_area_mm2, r.best_iou,
                           r.best_step, r.n_steps);
        for (std::size_t i = 0; i < static_cast<std::size_t>(kMaxPromptBudget); ++i) {
            out << ',';
            if (i < r.step_ious.size()) {
                out << fmt::format("{}", r.step_ious[i]);
            }
        }
        out << ',' << (r.failed ? 1 : 0) << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    write_csv(out, records);
    if (!out) {
        throw IoError(fmt::format("writing '{}' failed", path.string()));
    }
}

}  // namespace promptseg
