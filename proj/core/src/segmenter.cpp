// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/segmenter.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "promptseg/errors.hpp"

namespace promptseg {

void validate_request(const SegmentationRequest& request) {
    const auto& image = request.image;
    if (request.points.empty() && !request.box) {
        throw std::invalid_argument("segmentation request needs at least one point or a box");
    }
    for (const auto& p : request.points) {
        if (p.x < 0 || p.y < 0 || p.x >= image.width || p.y >= image.height) {
            throw std::invalid_argument(
                fmt::format("point ({}, {}) outside {}x{} image", p.x, p.y, image.width, image.height));
        }
    }
    if (request.box) {
        const auto& b = *request.box;
        if (b.min.x < 0 || b.min.y < 0 || b.min.x > b.max.x || b.min.y > b.max.y || b.max.x >= image.width ||
            b.max.y >= image.height) {
            throw std::invalid_argument(fmt::format("box [{},{}]-[{},{}] invalid for {}x{} image", b.min.x, b.min.y,
                                                    b.max.x, b.max.y, image.width, image.height));
        }
    }
}

void validate_triple(const PredictionTriple& triple, int width, int height) {
    for (std::size_t i = 0; i < triple.masks.size(); ++i) {
        const auto& m = triple.masks[i];
        if (m.width() != width || m.height() != height) {
            throw ProtocolError(
                fmt::format("mask {} is {}x{}, image is {}x{}", i, m.width(), m.height(), width, height));
        }
        const double p = triple.predicted_iou[i];
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ProtocolError(fmt::format("predicted_iou[{}] = {} outside [0, 1]", i, p));
        }
    }
}

PredictionTriple OracleTestSegmenter::predict(const SegmentationRequest& request) const {
    validate_request(request);
    const int w = request.image.width;
    const int h = request.image.height;
    if (gt_.width() != w || gt_.height() != h) {
        throw DimensionMismatchError("oracle test backend: ground truth does not match the image");
    }
    bool hit = false;
    for (const auto& p : request.points) {
        hit = hit || (p.label == PromptLabel::Foreground && gt_.at(p.x, p.y));
    }
    PredictionTriple triple{{BinaryMask2D(w, h), BinaryMask2D(w, h), BinaryMask2D(w, h)}, {0.0, 0.0, 0.0}};
    if (hit) {
        triple.masks[0] = gt_;
        triple.predicted_iou[0] = 1.0;
    }
    return triple;
}

std::string_view to_string(BackendKind kind) noexcept {
    switch (kind) {
        case BackendKind::Reference:
            return "reference";
        case BackendKind::OracleTest:
            return "oracle_test";
        case BackendKind::External:
            return "external";
    }
    return "reference";
}

BackendKind parse_backend_kind(std::string_view text) {
    if (text == "reference") {
        return BackendKind::Reference;
    }
    if (text == "oracle_test") {
        return BackendKind::OracleTest;
    }
    if (text == "external") {
        return BackendKind::External;
    }
    throw ConfigError(fmt::format("backend.kind: unknown backend '{}'", text));
}

BackendProvider::BackendProvider(BackendConfig config) : config_(std::move(config)) {
    switch (config_.kind) {
        case BackendKind::Reference:
            shared_ = std::make_shared<ReferenceSegmenter>(config_.tolerances);
            break;
        case BackendKind::External:
            shared_ = std::make_shared<ExternalSegmenter>(
                ExternalBackendOptions{config_.endpoint, config_.timeout_s, config_.pool_size});
            break;
        case BackendKind::OracleTest:
            break;
    }
}

std::shared_ptr<const Segmenter> BackendProvider::for_slice(const BinaryMask2D& ground_truth) const {
    if (config_.kind == BackendKind::OracleTest) {
        return std::make_shared<OracleTestSegmenter>(ground_truth);
    }
    return shared_;
}

std::string BackendProvider::backend_id() const {
    if (shared_) {
        try {
            return fmt::format("{}:{}", to_string(config_.kind), shared_->model_id());
        } catch (const BackendError&) {
            return fmt::format("{}:unavailable@{}", to_string(config_.kind), config_.endpoint);
        }
    }
    return std::string(to_string(config_.kind));
}

void BackendProvider::health_check() const {
    if (shared_) {
        shared_->health_check();
    }
}

}  // namespace promptseg
