// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "promptseg/mask.hpp"
#include "promptseg/volume.hpp"

namespace promptseg {

enum class PromptLabel { Foreground, Background };

struct PointPrompt {
    int x = 0;
    int y = 0;
    PromptLabel label = PromptLabel::Foreground;

    friend bool operator==(const PointPrompt&, const PointPrompt&) = default;
};

/// Inclusive pixel box.
struct BoxPrompt {
    Pixel min;
    Pixel max;

    bool contains(int x, int y) const noexcept { return x >= min.x && x <= max.x && y >= min.y && y <= max.y; }
    friend bool operator==(const BoxPrompt&, const BoxPrompt&) = default;
};

struct SegmentationRequest {
    SliceImage image;
    std::vector<PointPrompt> points;
    std::optional<BoxPrompt> box;
};

/// Throws std::invalid_argument when the request has no prompt or a prompt
/// lies outside the image.
void validate_request(const SegmentationRequest& request);

/// Three candidate masks plus the model's own IoU estimate for each.
struct PredictionTriple {
    std::array<BinaryMask2D, 3> masks;
    std::array<double, 3> predicted_iou{};

    friend bool operator==(const PredictionTriple&, const PredictionTriple&) = default;
};

/// Throws ProtocolError unless every mask is width×height and every
/// predicted IoU lies in [0, 1].
void validate_triple(const PredictionTriple& triple, int width, int height);

/// A promptable 2D segmenter. Implementations must be safe to call from
/// several threads at once.
class Segmenter {
public:
    virtual ~Segmenter() = default;

    virtual PredictionTriple predict(const SegmentationRequest& request) const = 0;
    /// Model identifier reported in run manifests.
    virtual std::string model_id() const = 0;
    /// Throws BackendError when the backend cannot serve requests.
    virtual void health_check() const {}
};

/// Test backend that knows the ground truth: when any foreground point lies
/// on the ground truth it returns (gt, empty, empty) with predicted IoUs
/// (1, 0, 0); otherwise three empty masks with predicted IoUs of 0.
class OracleTestSegmenter final : public Segmenter {
public:
    explicit OracleTestSegmenter(BinaryMask2D ground_truth) : gt_(std::move(ground_truth)) {}

    PredictionTriple predict(const SegmentationRequest& request) const override;
    std::string model_id() const override { return "oracle-test"; }

private:
    BinaryMask2D gt_;
};

/// Region-growing tolerances in gray levels, low to high.
struct ReferenceTolerances {
    std::array<int, 3> levels{8, 16, 32};
};

/// Deterministic classical stand-in for a foundation model. Each candidate
/// grows 8-connected regions from every foreground point over pixels within
/// a tolerance of the region's running mean; background points carve out the
/// part of the grown region they claim; a box clips growth.
class ReferenceSegmenter final : public Segmenter {
public:
    explicit ReferenceSegmenter(ReferenceTolerances tolerances = {});

    PredictionTriple predict(const SegmentationRequest& request) const override;
    std::string model_id() const override;

    /// One candidate mask at an explicit tolerance.
    BinaryMask2D segment(const SegmentationRequest& request, int tolerance) const;

private:
    ReferenceTolerances tolerances_;
};

struct ExternalBackendOptions {
    std::string endpoint;  // e.g. "http://127.0.0.1:8800"
    double timeout_s = 60.0;
    int pool_size = 4;
};

/// Wire-protocol client for an external segmenter service. At most
/// `pool_size` requests are in flight; each uses its own connection.
class ExternalSegmenter final : public Segmenter {
public:
    explicit ExternalSegmenter(ExternalBackendOptions options);
    ~ExternalSegmenter() override;

    PredictionTriple predict(const SegmentationRequest& request) const override;
    std::string model_id() const override;
    void health_check() const override;

    const ExternalBackendOptions& options() const noexcept { return options_; }

private:
    struct Pool;
    ExternalBackendOptions options_;
    std::unique_ptr<Pool> pool_;
};

enum class BackendKind { Reference, OracleTest, External };

struct BackendConfig {
    BackendKind kind = BackendKind::Reference;
    std::string endpoint;
    double timeout_s = 60.0;
    ReferenceTolerances tolerances;
    int pool_size = 4;
};

std::string_view to_string(BackendKind kind) noexcept;
BackendKind parse_backend_kind(std::string_view text);

/// Hands out the segmenter for one slice. Ground-truth-aware test backends
/// are instantiated per slice; the others are shared.
class BackendProvider {
public:
    explicit BackendProvider(BackendConfig config);

    std::shared_ptr<const Segmenter> for_slice(const BinaryMask2D& ground_truth) const;
    /// `kind:model`; falls back to `kind:unavailable@endpoint` when the model id cannot be fetched.
    std::string backend_id() const;
    void health_check() const;
    const BackendConfig& config() const noexcept { return config_; }

private:
    BackendConfig config_;
    std::shared_ptr<const Segmenter> shared_;
};

}  // namespace promptseg
