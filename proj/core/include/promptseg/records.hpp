// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptseg/prompt_sim.hpp"

namespace promptseg {

void to_json(nlohmann::json& j, const EvalRecord& r);
void from_json(const nlohmann::json& j, EvalRecord& r);

/// Canonical order: case, orientation, slice, policy, cropped.
void sort_records(std::vector<EvalRecord>& records);

/// One JSON object per line.
void write_jsonl(std::ostream& out, const std::vector<EvalRecord>& records);
void write_jsonl(const std::filesystem::path& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_jsonl(std::istream& in);
std::vector<EvalRecord> read_jsonl(const std::filesystem::path& path);

/// Columns: case_id, grade, orientation, slice_index, policy, cropped,
/// gt_area_mm2, best_iou, best_step, n_steps, iou_step_1..iou_step_9, failed.
void write_csv(std::ostream& out, const std::vector<EvalRecord>& records);
void write_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records);

}  // namespace promptseg
