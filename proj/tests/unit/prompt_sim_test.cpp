// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <mutex>

#include <gtest/gtest.h>
#include <httplib.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/phantom.hpp"
#include "promptseg/prompt_sim.hpp"

namespace promptseg {
namespace {

BinaryMask2D rect(int w, int h, int x0, int y0, int x1, int y1) {
    BinaryMask2D m(w, h);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            m.set(x, y);
        }
    }
    return m;
}

SliceImage image_of(const BinaryMask2D& fg) {
    std::vector<std::uint8_t> gray(fg.size());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        gray[i] = fg[i] ? 200 : 40;
    }
    return SliceImage::from_gray(fg.width(), fg.height(), gray);
}

// Answers with fixed triples in turn and records every request.
class ScriptedSegmenter final : public Segmenter {
public:
    explicit ScriptedSegmenter(std::vector<PredictionTriple> script) : script_(std::move(script)) {}

    PredictionTriple predict(const SegmentationRequest& request) const override {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
        return script_[std::min(requests_.size() - 1, script_.size() - 1)];
    }
    std::string model_id() const override { return "scripted"; }

    std::vector<SegmentationRequest> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }

private:
    std::vector<PredictionTriple> script_;
    mutable std::mutex mutex_;
    mutable std::vector<SegmentationRequest> requests_;
};

TEST(Prompts, InitialPromptIsTheDeepestForegroundPixel) {
    const auto gt = rect(12, 10, 2, 2, 8, 6);
    const auto p = initial_prompt(gt);
    EXPECT_EQ(p.label, PromptLabel::Foreground);
    EXPECT_EQ(interior_center(gt), (Pixel{p.x, p.y}));
    EXPECT_THROW(initial_prompt(BinaryMask2D(3, 3)), EmptyMaskError);
}

TEST(Prompts, CorrectiveClickTargetsTheLargestError) {
    const auto gt = rect(20, 10, 0, 0, 9, 9);
    // Under-segmentation: foreground click in the largest missed region.
    const auto under = rect(20, 10, 0, 0, 3, 9);
    const auto fg = next_prompt(gt, under);
    ASSERT_TRUE(fg);
    EXPECT_EQ(fg->label, PromptLabel::Foreground);
    EXPECT_TRUE(gt.at(fg->x, fg->y) && !under.at(fg->x, fg->y));
    EXPECT_EQ((Pixel{fg->x, fg->y}), interior_center(rect(20, 10, 4, 0, 9, 9)));
    // Over-segmentation: background click in the spill.
    const auto over = rect(20, 10, 0, 0, 15, 9);
    const auto bg = next_prompt(gt, over);
    ASSERT_TRUE(bg);
    EXPECT_EQ(bg->label, PromptLabel::Background);
    EXPECT_EQ((Pixel{bg->x, bg->y}), interior_center(rect(20, 10, 10, 0, 15, 9)));
    EXPECT_FALSE(next_prompt(gt, gt).has_value());
}

TEST(Selection, PoliciesAndTies) {
    const auto gt = rect(10, 10, 0, 0, 4, 4);
    PredictionTriple t{{rect(10, 10, 0, 0, 1, 1), gt, rect(10, 10, 0, 0, 9, 9)}, {0.2, 0.5, 0.9}};
    EXPECT_EQ(select_mask(SelectionPolicy::oracle(), t, gt).index, 1);
    EXPECT_DOUBLE_EQ(select_mask(SelectionPolicy::oracle(), t, gt).iou_vs_gt, 1.0);
    const auto suggested = select_mask(SelectionPolicy::suggested(), t, gt);
    EXPECT_EQ(suggested.index, 2);
    EXPECT_DOUBLE_EQ(suggested.iou_vs_gt, 0.25);
    EXPECT_EQ(select_mask(SelectionPolicy::previous_slice(rect(10, 10, 0, 0, 1, 2)), t, gt).index, 0);
    t.predicted_iou = {0.7, 0.7, 0.7};
    EXPECT_EQ(select_mask(SelectionPolicy::suggested(), t, gt).index, 0);
    EXPECT_THROW(select_mask(SelectionPolicy{PolicyKind::PreviousSlice, std::nullopt}, t, gt), ConfigError);
}

TEST(Session, OracleBackendFinishesInOneStep) {
    std::mt19937 rng(5);
    for (int i = 0; i < 20; ++i) {
        const auto gt = testing::random_blobs(rng, 30, 24, 2);
        if (gt.empty_mask()) {
            continue;
        }
        const OracleTestSegmenter backend(gt);
        const auto result = run_session(backend, image_of(gt), gt, SelectionPolicy::oracle());
        EXPECT_EQ(result.steps.size(), 1u);
        EXPECT_EQ(result.best_iou, 1.0);
        EXPECT_EQ(result.best_step, 1);
        EXPECT_TRUE(result.terminated_early);
        EXPECT_EQ(result.final_mask, gt);
    }
}

TEST(Session, AccumulatesPointsAndKeepsTheFirstBest) {
    const auto gt = rect(20, 10, 0, 0, 9, 9);
    const auto half = rect(20, 10, 0, 0, 4, 9);
    const auto most = rect(20, 10, 0, 0, 7, 9);
    const BinaryMask2D none(20, 10);
    // IoUs by step: 0.5, 0.8, 0.8, 0.5 ...
    ScriptedSegmenter backend({{{half, none, none}, {0.9, 0.1, 0.1}},
                               {{most, none, none}, {0.9, 0.1, 0.1}},
                               {{most, none, none}, {0.9, 0.1, 0.1}},
                               {{half, none, none}, {0.9, 0.1, 0.1}}});
    const auto result = run_session(backend, image_of(gt), gt, SelectionPolicy::suggested(), {5, std::nullopt});
    ASSERT_EQ(result.steps.size(), 5u);
    EXPECT_DOUBLE_EQ(result.best_iou, 0.8);
    EXPECT_EQ(result.best_step, 2);
    EXPECT_EQ(result.final_mask, most);
    EXPECT_FALSE(result.terminated_early);
    const auto requests = backend.requests();
    for (std::size_t i = 0; i < requests.size(); ++i) {
        ASSERT_EQ(requests[i].points.size(), i + 1);
        EXPECT_EQ(requests[i].points.back(), result.steps[i].prompt);
        if (i > 0) {
            EXPECT_TRUE(std::equal(requests[i - 1].points.begin(), requests[i - 1].points.end(),
                                   requests[i].points.begin()));
        }
    }
}

TEST(Session, BudgetAndMonotoneBestOnTheReferenceBackend) {
    std::mt19937 rng(8);
    const ReferenceSegmenter backend;
    std::uniform_int_distribution<int> noise(-25, 25);
    for (int i = 0; i < 30; ++i) {
        const auto gt = testing::random_blobs(rng, 32, 32, 4);
        if (gt.empty_mask()) {
            continue;
        }
        std::vector<std::uint8_t> gray(gt.size());
        for (std::size_t p = 0; p < gray.size(); ++p) {
            gray[p] = static_cast<std::uint8_t>((gt[p] ? 150 : 90) + noise(rng));
        }
        const auto image = SliceImage::from_gray(32, 32, gray);
        for (const auto& policy : {SelectionPolicy::oracle(), SelectionPolicy::suggested()}) {
            const auto r = run_session(backend, image, gt, policy);
            ASSERT_GE(r.steps.size(), 1u);
            ASSERT_LE(r.steps.size(), static_cast<std::size_t>(kMaxPromptBudget));
            double running = 0.0;
            for (std::size_t s = 0; s < r.steps.size(); ++s) {
                running = std::max(running, r.steps[s].selected_iou);
            }
            EXPECT_EQ(r.best_iou, running);
            EXPECT_EQ(r.steps[static_cast<std::size_t>(r.best_step - 1)].selected_iou, r.best_iou);
            for (int s = 0; s < r.best_step - 1; ++s) {
                EXPECT_LT(r.steps[static_cast<std::size_t>(s)].selected_iou, r.best_iou);
            }
            EXPECT_DOUBLE_EQ(iou(r.final_mask, gt), r.best_iou);
            EXPECT_EQ(run_session(backend, image, gt, policy), r);
        }
    }
}

TEST(Session, InputValidation) {
    const auto gt = rect(6, 6, 1, 1, 3, 3);
    const OracleTestSegmenter backend(gt);
    EXPECT_THROW(run_session(backend, image_of(rect(7, 6, 0, 0, 1, 1)), gt, SelectionPolicy::oracle()),
                 DimensionMismatchError);
    EXPECT_THROW(run_session(backend, image_of(gt), gt, SelectionPolicy::previous_slice(BinaryMask2D(5, 5))),
                 DimensionMismatchError);
    EXPECT_THROW(run_session(backend, image_of(gt), BinaryMask2D(6, 6), SelectionPolicy::oracle()), EmptyMaskError);
}

CaseVolumes phantom_case(int size = 32) {
    PhantomSpec spec;
    spec.case_id = "p";
    spec.dims = {size, size, size};
    spec.radius = size / 4.0;
    return make_phantom(spec);
}

TEST(EvaluateCase, RecordsEveryTumorSliceInOrder) {
    const auto volumes = phantom_case();
    const Volume core = tumor_core_mask(volumes.labels, kDefaultCoreLabels);
    BackendConfig config;
    config.kind = BackendKind::OracleTest;
    const BackendProvider backends(config);
    for (const auto o : {Orientation::Transversal, Orientation::Coronal, Orientation::Sagittal}) {
        const auto records = evaluate_case(volumes, o, PolicyKind::Oracle, false, backends);
        std::vector<int> expected;
        for (int k = 0; k < slice_count(core.dims(), o); ++k) {
            if (!extract_mask(core, o, k).empty_mask()) {
                expected.push_back(k);
            }
        }
        ASSERT_EQ(records.size(), expected.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& r = records[i];
            EXPECT_EQ(r.slice_index, expected[i]);
            EXPECT_EQ(r.best_iou, 1.0);
            EXPECT_EQ(r.best_step, 1);
            EXPECT_EQ(r.n_steps, 1);
            EXPECT_DOUBLE_EQ(r.gt_area_mm2, static_cast<double>(extract_mask(core, o, r.slice_index).count()));
            EXPECT_EQ(*r.final_mask, extract_mask(core, o, r.slice_index));
            EXPECT_FALSE(r.roi.has_value());
        }
    }
}

TEST(EvaluateCase, CroppedRecordsUseSourceIndices) {
    const auto volumes = phantom_case();
    BackendConfig config;
    config.kind = BackendKind::OracleTest;
    const BackendProvider backends(config);
    EvaluationSettings settings;
    settings.margin_mm = 2.0;
    const auto full = evaluate_case(volumes, Orientation::Coronal, PolicyKind::Oracle, false, backends, settings);
    const auto cropped = evaluate_case(volumes, Orientation::Coronal, PolicyKind::Oracle, true, backends, settings);
    ASSERT_EQ(full.size(), cropped.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
        EXPECT_EQ(full[i].slice_index, cropped[i].slice_index);
        EXPECT_EQ(full[i].gt_area_mm2, cropped[i].gt_area_mm2);
        ASSERT_TRUE(cropped[i].roi.has_value());
        EXPECT_EQ(cropped[i].final_mask->count(), full[i].final_mask->count());
        EXPECT_LT(cropped[i].final_mask->size(), full[i].final_mask->size());
    }
}

TEST(EvaluateCase, PreviousSlicePolicySeedsOnlyTheFirstSlice) {
    const auto volumes = phantom_case();
    const BackendProvider backends(BackendConfig{});
    const auto records = evaluate_case(volumes, Orientation::Transversal, PolicyKind::PreviousSlice, false, backends);
    ASSERT_FALSE(records.empty());
    EXPECT_TRUE(records.front().oracle_seeded);
    for (std::size_t i = 1; i < records.size(); ++i) {
        EXPECT_FALSE(records[i].oracle_seeded);
    }
}

TEST(EvaluateCase, BackendFailuresBecomeFailedRecords) {
    testing::StubServer stub([](httplib::Server& s) {
        s.Post("/v1/predict", [](const httplib::Request&, httplib::Response& res) {
            res.status = 503;
            res.set_content("down", "text/plain");
        });
    });
    BackendConfig config;
    config.kind = BackendKind::External;
    config.endpoint = stub.url();
    config.timeout_s = 5.0;
    const BackendProvider backends(config);
    const auto records = evaluate_case(phantom_case(), Orientation::Transversal, PolicyKind::Oracle, false, backends);
    ASSERT_FALSE(records.empty());
    for (const auto& r : records) {
        EXPECT_TRUE(r.failed);
        EXPECT_NE(r.error.find("503"), std::string::npos);
        EXPECT_FALSE(r.final_mask.has_value());
    }
}

}  // namespace
}  // namespace promptseg
