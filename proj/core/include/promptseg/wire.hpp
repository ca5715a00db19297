// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

// JSON encoding of the external segmenter protocol:
//
//   POST /v1/predict
//     {"image":{"width":W,"height":H,"pixels_b64":"..."},
//      "points":[{"x":..,"y":..,"label":"fg"|"bg"}],
//      "box":{"min":[x,y],"max":[x,y]} | null}
//   -> {"masks":[RleMask,RleMask,RleMask],"predicted_iou":[f,f,f]}
//
//   GET /v1/health -> {"status":"ok","model":"<id>"}
//
// Pixels travel as one byte per pixel, row-major, single channel.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptseg/segmenter.hpp"

namespace promptseg::wire {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ProtocolError on invalid input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

nlohmann::json encode_request(const SegmentationRequest& request);
/// Server side. Throws ProtocolError on any schema violation.
SegmentationRequest decode_request(const nlohmann::json& body);

nlohmann::json encode_triple(const PredictionTriple& triple);
/// Client side. Validates mask count, RLE sums, dimensions and IoU range;
/// throws ProtocolError.
PredictionTriple decode_triple(const nlohmann::json& body, int width, int height);

nlohmann::json encode_point(const PointPrompt& p);
PointPrompt decode_point(const nlohmann::json& j);
nlohmann::json encode_box(const BoxPrompt& b);
BoxPrompt decode_box(const nlohmann::json& j);

}  // namespace promptseg::wire
