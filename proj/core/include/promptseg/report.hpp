// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptseg/prompt_sim.hpp"
#include "promptseg/stats.hpp"

namespace promptseg {

/// An experiment arm: selection policy × full/cropped slices.
struct Variant {
    PolicyKind policy = PolicyKind::Oracle;
    bool cropped = false;

    std::string label() const;
    friend auto operator<=>(const Variant&, const Variant&) = default;
};

struct GroupSummary {
    Variant variant;
    std::string grade;  // "all", "HGG", "LGG" or "unknown"
    stats::SummaryStats best_iou;
    stats::SummaryStats best_step;
    std::size_t failed = 0;
};

/// Mean of the best IoU reached within the first k prompts, k = 1..9.
/// Sessions that stopped earlier carry their final best forward.
struct StepCurve {
    Variant variant;
    std::array<double, kMaxPromptBudget> mean_best_iou{};
    std::size_t n = 0;
};

struct ScatterPoint {
    std::string case_id;
    int slice_index = 0;
    double gt_area_mm2 = 0.0;
    double best_iou = 0.0;
};

struct PairedComparison {
    Variant a;
    Variant b;
    std::size_t n_pairs = 0;
    double mean_difference = 0.0;  // a - b
    std::optional<stats::TestResult> test;
    std::string note;
};

struct GradeComparison {
    Variant variant;
    std::size_t n_hgg = 0;
    std::size_t n_lgg = 0;
    std::optional<stats::TestResult> test;
    std::string note;
};

struct AggregateReport {
    std::size_t n_records = 0;
    std::size_t n_failed = 0;
    std::size_t n_oracle_seeded = 0;
    Variant primary;
    std::vector<GroupSummary> groups;
    std::vector<StepCurve> curves;
    std::vector<ScatterPoint> scatter;
    std::optional<stats::Correlation> area_correlation;
    std::optional<stats::ThresholdResult> area_threshold;
    std::optional<stats::SummaryStats> below_threshold;
    std::optional<stats::SummaryStats> above_threshold;
    std::vector<PairedComparison> paired;
    std::vector<GradeComparison> by_grade;
    std::vector<std::string> notes;
};

struct ReportOptions {
    stats::MaxstatOptions maxstat;
};

/// Groups, curves and tests over the non-failed records. Area-vs-IoU
/// analyses use the primary variant (oracle on full slices when present).
/// Throws StatsError on an empty record set.
AggregateReport aggregate_report(const std::vector<EvalRecord>& records, const ReportOptions& options = {});

nlohmann::json to_json(const AggregateReport& report);
std::string to_markdown(const AggregateReport& report);

/// Writes report.json, report.md, curves.csv, scatter.csv and maxstat.csv.
void write_report(const std::filesystem::path& dir, const AggregateReport& report);

}  // namespace promptseg
