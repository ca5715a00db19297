// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/wire.hpp"

#include <cmath>

#include <fmt/format.h>
#include <sodium.h>

#include "promptseg/errors.hpp"

namespace promptseg::wire {

namespace {

constexpr int kBase64Variant = sodium_base64_VARIANT_ORIGINAL;

const nlohmann::json& field(const nlohmann::json& j, const char* name) {
    if (!j.is_object() || !j.contains(name)) {
        throw ProtocolError(fmt::format("missing field '{}'", name));
    }
    return j.at(name);
}

int integer_field(const nlohmann::json& j, const char* name) {
    const auto& v = field(j, name);
    if (!v.is_number_integer()) {
        throw ProtocolError(fmt::format("field '{}' must be an integer", name));
    }
    return v.get<int>();
}

Pixel pair(const nlohmann::json& j, const char* name) {
    const auto& v = field(j, name);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
        throw ProtocolError(fmt::format("field '{}' must be [x, y]", name));
    }
    return {v[0].get<int>(), v[1].get<int>()};
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(sodium_base64_ENCODED_LEN(bytes.size(), kBase64Variant), '\0');
    sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), kBase64Variant);
    out.resize(out.size() - 1);  // trailing NUL
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
    std::size_t length = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &length, &end,
                          kBase64Variant) != 0 ||
        end != text.data() + text.size()) {
        throw ProtocolError("invalid base64 payload");
    }
    out.resize(length);
    return out;
}

nlohmann::json encode_point(const PointPrompt& p) {
    return {{"x", p.x}, {"y", p.y}, {"label", p.label == PromptLabel::Foreground ? "fg" : "bg"}};
}

PointPrompt decode_point(const nlohmann::json& j) {
    PointPrompt p;
    p.x = integer_field(j, "x");
    p.y = integer_field(j, "y");
    const auto& label = field(j, "label");
    if (label == "fg") {
        p.label = PromptLabel::Foreground;
    } else if (label == "bg") {
        p.label = PromptLabel::Background;
    } else {
        throw ProtocolError("point label must be \"fg\" or \"bg\"");
    }
    return p;
}

nlohmann::json encode_box(const BoxPrompt& b) {
    return {{"min", {b.min.x, b.min.y}}, {"max", {b.max.x, b.max.y}}};
}

BoxPrompt decode_box(const nlohmann::json& j) { return {pair(j, "min"), pair(j, "max")}; }

nlohmann::json encode_request(const SegmentationRequest& request) {
    const auto gray = request.image.gray_pixels();
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : request.points) {
        points.push_back(encode_point(p));
    }
    return {
        {"image", {{"width", request.image.width}, {"height", request.image.height}, {"pixels_b64", base64_encode(gray)}}},
        {"points", std::move(points)},
        {"box", request.box ? encode_box(*request.box) : nlohmann::json(nullptr)},
    };
}

SegmentationRequest decode_request(const nlohmann::json& body) {
    const auto& image = field(body, "image");
    const int width = integer_field(image, "width");
    const int height = integer_field(image, "height");
    const auto& b64 = field(image, "pixels_b64");
    if (!b64.is_string()) {
        throw ProtocolError("pixels_b64 must be a string");
    }
    const auto pixels = base64_decode(b64.get<std::string>());
    if (width < 1 || height < 1 || pixels.size() != static_cast<std::size_t>(width) * height) {
        throw ProtocolError(fmt::format("image carries {} pixels for {}x{}", pixels.size(), width, height));
    }
    SegmentationRequest request;
    request.image = SliceImage::from_gray(width, height, pixels);
    const auto& points = field(body, "points");
    if (!points.is_array()) {
        throw ProtocolError("points must be an array");
    }
    for (const auto& p : points) {
        request.points.push_back(decode_point(p));
    }
    if (body.contains("box") && !body.at("box").is_null()) {
        request.box = decode_box(body.at("box"));
    }
    try {
        validate_request(request);
    } catch (const std::invalid_argument& e) {
        throw ProtocolError(e.what());
    }
    return request;
}

nlohmann::json encode_triple(const PredictionTriple& triple) {
    nlohmann::json masks = nlohmann::json::array();
    for (const auto& m : triple.masks) {
        masks.push_back(rle_encode(m));
    }
    return {{"masks", std::move(masks)},
            {"predicted_iou", {triple.predicted_iou[0], triple.predicted_iou[1], triple.predicted_iou[2]}}};
}

PredictionTriple decode_triple(const nlohmann::json& body, int width, int height) {
    const auto& masks = field(body, "masks");
    const auto& ious = field(body, "predicted_iou");
    if (!masks.is_array() || masks.size() != 3) {
        throw ProtocolError(fmt::format("expected exactly 3 masks, got {}", masks.is_array() ? masks.size() : 0));
    }
    if (!ious.is_array() || ious.size() != 3) {
        throw ProtocolError("expected exactly 3 predicted IoUs");
    }
    PredictionTriple triple;
    for (std::size_t i = 0; i < 3; ++i) {
        try {
            triple.masks[i] = rle_decode(masks[i].get<RleMask>());
        } catch (const MalformedRleError& e) {
            throw ProtocolError(fmt::format("mask {}: {}", i, e.what()));
        }
        if (!ious[i].is_number()) {
            throw ProtocolError("predicted IoUs must be numbers");
        }
        triple.predicted_iou[i] = ious[i].get<double>();
    }
    validate_triple(triple, width, height);
    return triple;
}

}  // namespace promptseg::wire
