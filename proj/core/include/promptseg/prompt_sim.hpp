// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "promptseg/mask.hpp"
#include "promptseg/segmenter.hpp"
#include "promptseg/volume.hpp"

namespace promptseg {

inline constexpr int kMaxPromptBudget = 9;

enum class PolicyKind { Oracle, Suggested, PreviousSlice };

std::string_view to_string(PolicyKind kind) noexcept;
PolicyKind parse_policy(std::string_view text);

/// How one of the three candidate masks is chosen.
struct SelectionPolicy {
    PolicyKind kind = PolicyKind::Oracle;
    /// Required iff kind == PreviousSlice.
    std::optional<BinaryMask2D> previous_mask;

    static SelectionPolicy oracle() { return {PolicyKind::Oracle, std::nullopt}; }
    static SelectionPolicy suggested() { return {PolicyKind::Suggested, std::nullopt}; }
    static SelectionPolicy previous_slice(BinaryMask2D previous) {
        return {PolicyKind::PreviousSlice, std::move(previous)};
    }
};

struct Selection {
    int index = 0;
    /// IoU of the chosen mask against ground truth, whatever the policy.
    double iou_vs_gt = 0.0;
};

struct SessionStep {
    PointPrompt prompt;
    std::array<double, 3> calculated_iou{};
    std::array<double, 3> predicted_iou{};
    int selected_index = 0;
    double selected_iou = 0.0;

    friend bool operator==(const SessionStep&, const SessionStep&) = default;
};

struct SessionResult {
    std::vector<SessionStep> steps;
    double best_iou = 0.0;
    int best_step = 1;  // 1-based
    BinaryMask2D final_mask;
    bool terminated_early = false;

    friend bool operator==(const SessionResult&, const SessionResult&) = default;
};

/// Foreground point at the deepest interior pixel of the ground truth.
/// Throws EmptyMaskError.
PointPrompt initial_prompt(const BinaryMask2D& gt);

/// Corrective click. When the ground truth is larger than the prediction a
/// foreground point goes to the center of the largest region of gt − pred;
/// otherwise a background point goes to the center of the largest region of
/// pred − gt. Falls back to the other difference when the chosen one is
/// empty; returns nullopt when pred == gt.
std::optional<PointPrompt> next_prompt(const BinaryMask2D& gt, const BinaryMask2D& pred);

/// Ties go to the lowest index. Throws ConfigError for a previous-slice
/// policy without a previous mask.
Selection select_mask(const SelectionPolicy& policy, const PredictionTriple& triple, const BinaryMask2D& gt);

struct SessionOptions {
    int max_points = kMaxPromptBudget;
    std::optional<BoxPrompt> box;
};

/// Simulated expert loop over one slice. Every backend call carries all
/// accumulated points. Stops when the selected mask equals the ground truth,
/// when no corrective click exists, or when the point budget is spent.
/// Backend errors propagate.
SessionResult run_session(const Segmenter& backend, const SliceImage& image, const BinaryMask2D& gt,
                          const SelectionPolicy& policy, const SessionOptions& options = {});

enum class Grade { HGG, LGG, Unknown };
std::string_view to_string(Grade grade) noexcept;
Grade parse_grade(std::string_view text);

/// Summary row of one evaluated slice.
struct EvalRecord {
    std::string case_id;
    Grade grade = Grade::Unknown;
    Orientation orientation = Orientation::Transversal;
    /// Index in the source (uncropped) grid.
    int slice_index = 0;
    PolicyKind policy = PolicyKind::Oracle;
    bool cropped = false;
    double gt_area_mm2 = 0.0;
    double best_iou = 0.0;
    int best_step = 0;
    int n_steps = 0;
    std::vector<double> step_ious;
    bool failed = false;
    std::string error;
    /// Previous-slice policy only: this slice had no predecessor and was
    /// selected with the oracle policy.
    bool oracle_seeded = false;
    /// Selected mask at the best step, in the evaluated (possibly cropped) grid.
    std::optional<BinaryMask2D> final_mask;
    /// Crop window, when cropped.
    std::optional<Roi3D> roi;

    friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct CaseVolumes {
    std::string case_id;
    Grade grade = Grade::Unknown;
    Volume intensity;
    Volume labels;
};

struct EvaluationSettings {
    std::set<int> core_labels = kDefaultCoreLabels;
    double margin_mm = 20.0;
    int max_points = kMaxPromptBudget;
    /// Keep final masks on the records (needed for 3D fusion).
    bool keep_masks = true;
};

/// Runs one session per slice with tumor core along `orientation`, in
/// ascending slice order. Backend failures become failed records.
std::vector<EvalRecord> evaluate_case(const CaseVolumes& volumes, Orientation orientation, PolicyKind policy,
                                      bool cropped, const BackendProvider& backends,
                                      const EvaluationSettings& settings = {});

}  // namespace promptseg
