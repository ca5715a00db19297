// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/prompt_sim.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "promptseg/errors.hpp"

namespace promptseg {

std::string_view to_string(PolicyKind kind) noexcept {
    switch (kind) {
        case PolicyKind::Oracle:
            return "oracle";
        case PolicyKind::Suggested:
            return "suggested";
        case PolicyKind::PreviousSlice:
            return "previous_slice";
    }
    return "oracle";
}

PolicyKind parse_policy(std::string_view text) {
    if (text == "oracle") {
        return PolicyKind::Oracle;
    }
    if (text == "suggested") {
        return PolicyKind::Suggested;
    }
    if (text == "previous_slice") {
        return PolicyKind::PreviousSlice;
    }
    throw ConfigError(fmt::format("unknown selection policy '{}'", text));
}

std::string_view to_string(Grade grade) noexcept {
    switch (grade) {
        case Grade::HGG:
            return "HGG";
        case Grade::LGG:
            return "LGG";
        case Grade::Unknown:
            return "unknown";
    }
    return "unknown";
}

Grade parse_grade(std::string_view text) {
    if (text == "HGG") {
        return Grade::HGG;
    }
    if (text == "LGG") {
        return Grade::LGG;
    }
    if (text == "unknown" || text.empty()) {
        return Grade::Unknown;
    }
    throw ConfigError(fmt::format("grade must be HGG or LGG, got '{}'", text));
}

PointPrompt initial_prompt(const BinaryMask2D& gt) {
    const Pixel center = interior_center(gt);
    return {center.x, center.y, PromptLabel::Foreground};
}

std::optional<PointPrompt> next_prompt(const BinaryMask2D& gt, const BinaryMask2D& pred) {
    const BinaryMask2D missed = difference(gt, pred);
    const BinaryMask2D spilled = difference(pred, gt);
    // Literal reading of the rule: a tie in area places a background point.
    const bool foreground = gt.count() > pred.count();
    const BinaryMask2D* target = foreground ? &missed : &spilled;
    PromptLabel label = foreground ? PromptLabel::Foreground : PromptLabel::Background;
    if (target->empty_mask()) {
        target = foreground ? &spilled : &missed;
        label = foreground ? PromptLabel::Background : PromptLabel::Foreground;
    }
    if (target->empty_mask()) {
        return std::nullopt;
    }
    const Pixel center = interior_center(largest_component(*target));
    return PointPrompt{center.x, center.y, label};
}

Selection select_mask(const SelectionPolicy& policy, const PredictionTriple& triple, const BinaryMask2D& gt) {
    std::array<double, 3> score{};
    for (std::size_t i = 0; i < 3; ++i) {
        switch (policy.kind) {
            case PolicyKind::Oracle:
                score[i] = iou(triple.masks[i], gt);
                break;
            case PolicyKind::Suggested:
                score[i] = triple.predicted_iou[i];
                break;
            case PolicyKind::PreviousSlice:
                if (!policy.previous_mask) {
                    throw ConfigError("previous_slice policy requires a previous mask");
                }
                score[i] = iou(triple.masks[i], *policy.previous_mask);
                break;
        }
    }
    const auto index = static_cast<int>(std::max_element(score.begin(), score.end()) - score.begin());
    return {index, iou(triple.masks[static_cast<std::size_t>(index)], gt)};
}

SessionResult run_session(const Segmenter& backend, const SliceImage& image, const BinaryMask2D& gt,
                          const SelectionPolicy& policy, const SessionOptions& options) {
    if (gt.width() != image.width || gt.height() != image.height) {
        throw DimensionMismatchError("run_session: ground truth does not match the image");
    }
    if (options.max_points < 1) {
        throw ConfigError("max_points must be at least 1");
    }
    if (policy.previous_mask && !policy.previous_mask->same_shape(gt)) {
        throw DimensionMismatchError("run_session: previous mask does not match the slice");
    }

    SessionResult result;
    SegmentationRequest request{image, {initial_prompt(gt)}, options.box};
    for (;;) {
        const PredictionTriple triple = backend.predict(request);
        validate_triple(triple, image.width, image.height);
        const Selection selection = select_mask(policy, triple, gt);
        const auto& selected = triple.masks[static_cast<std::size_t>(selection.index)];

        SessionStep step;
        step.prompt = request.points.back();
        for (std::size_t i = 0; i < 3; ++i) {
            step.calculated_iou[i] = iou(triple.masks[i], gt);
        }
        step.predicted_iou = triple.predicted_iou;
        step.selected_index = selection.index;
        step.selected_iou = selection.iou_vs_gt;
        result.steps.push_back(step);

        if (result.steps.size() == 1 || step.selected_iou > result.best_iou) {
            result.best_iou = step.selected_iou;
            result.best_step = static_cast<int>(result.steps.size());
            result.final_mask = selected;
        }

        if (selected == gt) {
            result.terminated_early = true;
            break;
        }
        if (static_cast<int>(result.steps.size()) >= options.max_points) {
            break;
        }
        auto next = next_prompt(gt, selected);
        if (!next) {
            break;
        }
        request.points.push_back(*next);
    }
    return result;
}

namespace {

struct PreparedCase {
    Volume image;  // normalized 8-bit intensities
    Volume core;
    std::optional<Roi3D> roi;
};

PreparedCase prepare(const CaseVolumes& volumes, bool cropped, const EvaluationSettings& settings) {
    if (volumes.intensity.dims() != volumes.labels.dims()) {
        throw DimensionMismatchError(fmt::format("case {}: intensity and label grids differ", volumes.case_id));
    }
    PreparedCase prepared{normalize_intensities(volumes.intensity),
                          tumor_core_mask(volumes.labels, settings.core_labels), std::nullopt};
    if (cropped) {
        const Roi3D roi = tumor_bounding_roi(prepared.core, settings.margin_mm);
        prepared.image = crop(prepared.image, roi);
        prepared.core = crop(prepared.core, roi);
        prepared.roi = roi;
    }
    return prepared;
}

}  // namespace

std::vector<EvalRecord> evaluate_case(const CaseVolumes& volumes, Orientation orientation, PolicyKind policy,
                                      bool cropped, const BackendProvider& backends,
                                      const EvaluationSettings& settings) {
    const PreparedCase prepared = prepare(volumes, cropped, settings);
    const int offset = prepared.roi ? prepared.roi->min[fixed_axis(orientation)] : 0;
    const PixelSpacing spacing = slice_spacing(prepared.core.spacing(), orientation);

    std::vector<EvalRecord> records;
    std::optional<BinaryMask2D> previous;
    const int count = slice_count(prepared.core.dims(), orientation);
    for (int k = 0; k < count; ++k) {
        const BinaryMask2D gt = extract_mask(prepared.core, orientation, k);
        if (gt.empty_mask()) {
            continue;
        }
        EvalRecord record;
        record.case_id = volumes.case_id;
        record.grade = volumes.grade;
        record.orientation = orientation;
        record.slice_index = k + offset;
        record.policy = policy;
        record.cropped = cropped;
        record.gt_area_mm2 = area(gt, spacing);
        record.roi = prepared.roi;

        SelectionPolicy selection;
        switch (policy) {
            case PolicyKind::Oracle:
                selection = SelectionPolicy::oracle();
                break;
            case PolicyKind::Suggested:
                selection = SelectionPolicy::suggested();
                break;
            case PolicyKind::PreviousSlice:
                if (previous) {
                    selection = SelectionPolicy::previous_slice(*previous);
                } else {
                    selection = SelectionPolicy::oracle();
                    record.oracle_seeded = true;
                }
                break;
        }

        try {
            const SliceImage image = extract_slice(prepared.image, orientation, k);
            const auto backend = backends.for_slice(gt);
            const SessionResult session =
                run_session(*backend, image, gt, selection, SessionOptions{settings.max_points, std::nullopt});
            record.best_iou = session.best_iou;
            record.best_step = session.best_step;
            record.n_steps = static_cast<int>(session.steps.size());
            for (const auto& step : session.steps) {
                record.step_ious.push_back(step.selected_iou);
            }
            if (settings.keep_masks) {
                record.final_mask = session.final_mask;
            }
            previous = session.final_mask;
        } catch (const BackendError& e) {
            record.failed = true;
            record.error = e.what();
        }
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace promptseg
