// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/annotation.hpp"

#include <chrono>
#include <fstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "promptseg/errors.hpp"
#include "promptseg/wire.hpp"

namespace promptseg {

namespace {

namespace fs = std::filesystem;

struct ParsedPrompt {
    std::optional<PointPrompt> point;
    std::optional<BoxPrompt> box;
};

ParsedPrompt parse_prompt(const nlohmann::json& j, int width, int height) {
    ParsedPrompt p;
    try {
        if (!j.is_object() || j.contains("point") == j.contains("box")) {
            throw InvalidPromptError("a prompt holds exactly one of \"point\" or \"box\"");
        }
        if (j.contains("point")) {
            p.point = wire::decode_point(j.at("point"));
        } else {
            p.box = wire::decode_box(j.at("box"));
        }
    } catch (const InvalidPromptError&) {
        throw;
    } catch (const std::exception& e) {
        throw InvalidPromptError(fmt::format("malformed prompt: {}", e.what()));
    }
    const auto inside = [&](int x, int y) { return x >= 0 && y >= 0 && x < width && y < height; };
    if (p.point && !inside(p.point->x, p.point->y)) {
        throw InvalidPromptError(
            fmt::format("point ({}, {}) lies outside the {}x{} slice", p.point->x, p.point->y, width, height));
    }
    if (p.box && (!inside(p.box->min.x, p.box->min.y) || !inside(p.box->max.x, p.box->max.y) ||
                  p.box->min.x > p.box->max.x || p.box->min.y > p.box->max.y)) {
        throw InvalidPromptError("box corners must lie inside the slice with min <= max");
    }
    return p;
}

int int_field(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_number_integer()) {
        throw InvalidPromptError(fmt::format("field \"{}\" must be an integer", key));
    }
    return j.at(key).get<int>();
}

SliceAnnotation& open_slice(SessionState& s, int k) {
    if (k < 0 || k >= s.n_slices) {
        throw NotFoundError(fmt::format("slice {} is outside [0, {})", k, s.n_slices));
    }
    auto& slice = s.slices[k];
    if (slice.finalized) {
        throw ConflictError(fmt::format("slice {} is finalized", k));
    }
    return slice;
}

void write_file(const fs::path& path, const std::vector<SessionEvent>& events, const std::string& id) {
    const nlohmann::json doc = {{"session_id", id}, {"events", events}};
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << doc.dump() << '\n';
        out.flush();
        if (!out) {
            throw IoError(fmt::format("writing '{}' failed", tmp.string()));
        }
    }
    fs::rename(tmp, path);
}

}  // namespace

std::string utc_now_millis() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)), ms);
}

BinaryMask2D SessionState::chosen_mask(int k) const {
    const auto it = slices.find(k);
    if (it == slices.end() || !it->second.candidates || it->second.chosen_index < 0) {
        return BinaryMask2D(width, height);
    }
    return it->second.candidates->masks[static_cast<std::size_t>(it->second.chosen_index)];
}

std::vector<int> SessionState::finalized_slices() const {
    std::vector<int> out;
    for (const auto& [k, s] : slices) {
        if (s.finalized) {
            out.push_back(k);
        }
    }
    return out;
}

void to_json(nlohmann::json& j, const SessionEvent& e) { j = {{"type", e.type}, {"at", e.at}, {"data", e.data}}; }

void from_json(const nlohmann::json& j, SessionEvent& e) {
    e.type = j.at("type").get<std::string>();
    e.at = j.at("at").get<std::string>();
    e.data = j.at("data");
}

void apply_event(SessionState& s, const SessionEvent& event) {
    const auto& d = event.data;
    if (event.type == "created") {
        if (!s.id.empty()) {
            throw ConflictError("session already created");
        }
        SessionState fresh;
        fresh.id = d.at("session_id").get<std::string>();
        fresh.case_id = d.at("case_id").get<std::string>();
        fresh.orientation = parse_orientation(d.at("orientation").get<std::string>());
        fresh.policy = parse_policy(d.at("policy").get<std::string>());
        fresh.width = d.at("width").get<int>();
        fresh.height = d.at("height").get<int>();
        fresh.n_slices = d.at("n_slices").get<int>();
        fresh.current_slice = fresh.n_slices / 2;
        s = std::move(fresh);
    } else if (s.id.empty()) {
        throw ConflictError("the first event must create the session");
    } else if (event.type == "prompt") {
        const int k = int_field(d, "slice");
        const auto prompt = parse_prompt(d.at("prompt"), s.width, s.height);
        auto triple = wire::decode_triple(d.at("candidates"), s.width, s.height);
        const int pre = int_field(d, "preselected_index");
        if (pre < 0 || pre > 2) {
            throw InvalidPromptError("preselected_index must be 0, 1 or 2");
        }
        auto& slice = open_slice(s, k);
        if (prompt.point) {
            slice.points.push_back(*prompt.point);
        } else {
            slice.box = prompt.box;
        }
        slice.candidates = std::move(triple);
        slice.preselected_index = pre;
        slice.chosen_index = pre;
        s.current_slice = k;
    } else if (event.type == "select") {
        const int k = int_field(d, "slice");
        const int index = int_field(d, "index");
        auto& slice = open_slice(s, k);
        if (!slice.candidates) {
            throw InvalidPromptError(fmt::format("slice {} has no candidates to select from", k));
        }
        if (index < 0 || index > 2) {
            throw InvalidPromptError("index must be 0, 1 or 2");
        }
        slice.chosen_index = index;
        s.current_slice = k;
    } else if (event.type == "finalize") {
        const int k = int_field(d, "slice");
        open_slice(s, k).finalized = true;
        s.current_slice = k;
    } else {
        throw InvalidPromptError(fmt::format("unknown event type '{}'", event.type));
    }
    s.persisted_at = event.at;
}

SessionState replay(const std::vector<SessionEvent>& events) {
    SessionState s;
    for (const auto& e : events) {
        apply_event(s, e);
    }
    return s;
}

int preselect(const SessionState& state, int k, const PredictionTriple& triple, const BinaryMask2D* ground_truth) {
    const BinaryMask2D none(state.width, state.height);
    if (state.policy == PolicyKind::Oracle && ground_truth != nullptr) {
        return select_mask(SelectionPolicy::oracle(), triple, *ground_truth).index;
    }
    if (state.policy == PolicyKind::PreviousSlice) {
        std::optional<int> nearest;
        for (const int j : state.finalized_slices()) {
            if (j != k && (!nearest || std::abs(j - k) < std::abs(*nearest - k))) {
                nearest = j;
            }
        }
        if (nearest) {
            return select_mask(SelectionPolicy::previous_slice(state.chosen_mask(*nearest)), triple, none).index;
        }
    }
    return select_mask(SelectionPolicy::suggested(), triple, none).index;
}

nlohmann::json to_json(const SessionState& s) {
    nlohmann::json slices = nlohmann::json::object();
    for (const auto& [k, slice] : s.slices) {
        nlohmann::json points = nlohmann::json::array();
        for (const auto& p : slice.points) {
            points.push_back(wire::encode_point(p));
        }
        nlohmann::json entry = {
            {"points", std::move(points)},
            {"box", slice.box ? wire::encode_box(*slice.box) : nlohmann::json(nullptr)},
            {"preselected_index", slice.preselected_index < 0 ? nlohmann::json(nullptr) : nlohmann::json(slice.preselected_index)},
            {"chosen_index", slice.chosen_index < 0 ? nlohmann::json(nullptr) : nlohmann::json(slice.chosen_index)},
            {"finalized", slice.finalized},
        };
        if (slice.candidates) {
            entry["candidates"] = wire::encode_triple(*slice.candidates).at("masks");
            entry["predicted_iou"] = slice.candidates->predicted_iou;
        } else {
            entry["candidates"] = nullptr;
            entry["predicted_iou"] = nullptr;
        }
        slices[std::to_string(k)] = std::move(entry);
    }
    return {
        {"session_id", s.id},
        {"case_id", s.case_id},
        {"orientation", to_string(s.orientation)},
        {"policy", to_string(s.policy)},
        {"width", s.width},
        {"height", s.height},
        {"n_slices", s.n_slices},
        {"current_slice", s.current_slice},
        {"slices", std::move(slices)},
        {"persisted_at", s.persisted_at},
    };
}

AnnotationSession::AnnotationSession(fs::path file, Clock clock)
    : file_(std::move(file)), clock_(clock ? std::move(clock) : Clock(utc_now_millis)) {}

std::unique_ptr<AnnotationSession> AnnotationSession::create(const fs::path& dir, std::string id,
                                                             std::string case_id, Orientation orientation,
                                                             PolicyKind policy, const Dims3& dims, Clock clock) {
    fs::create_directories(dir);
    std::unique_ptr<AnnotationSession> session(new AnnotationSession(dir / (id + ".json"), std::move(clock)));
    const auto shape = slice_shape(dims, orientation);
    session->commit({"created",
                     {{"session_id", id},
                      {"case_id", std::move(case_id)},
                      {"orientation", to_string(orientation)},
                      {"policy", to_string(policy)},
                      {"width", shape[0]},
                      {"height", shape[1]},
                      {"n_slices", slice_count(dims, orientation)}},
                     {}});
    return session;
}

std::unique_ptr<AnnotationSession> AnnotationSession::load(const fs::path& file, Clock clock) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open session file '{}'", file.string()));
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("session file '{}' is not valid JSON: {}", file.string(), e.what()));
    }
    std::unique_ptr<AnnotationSession> session(new AnnotationSession(file, std::move(clock)));
    session->events_ = doc.at("events").get<std::vector<SessionEvent>>();
    session->state_ = replay(session->events_);
    return session;
}

SessionState AnnotationSession::state() const {
    std::lock_guard lock(mutex_);
    return state_;
}

std::vector<SessionEvent> AnnotationSession::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

void AnnotationSession::commit(SessionEvent event) {
    event.at = clock_();
    SessionState next = state_;
    apply_event(next, event);
    auto events = events_;
    events.push_back(std::move(event));
    write_file(file_, events, next.id);
    events_ = std::move(events);
    state_ = std::move(next);
}

PromptOutcome AnnotationSession::add_prompt(int k, const nlohmann::json& prompt, const SliceImage& image,
                                            const BinaryMask2D& ground_truth, const Segmenter& segmenter) {
    std::lock_guard lock(mutex_);
    const auto parsed = parse_prompt(prompt, state_.width, state_.height);
    SliceAnnotation slice;
    if (k < 0 || k >= state_.n_slices) {
        throw NotFoundError(fmt::format("slice {} is outside [0, {})", k, state_.n_slices));
    }
    if (const auto it = state_.slices.find(k); it != state_.slices.end()) {
        slice = it->second;
    }
    if (slice.finalized) {
        throw ConflictError(fmt::format("slice {} is finalized", k));
    }
    if (image.width != state_.width || image.height != state_.height) {
        throw DimensionMismatchError("slice image does not match the session's slice shape");
    }

    SegmentationRequest request{image, slice.points, slice.box};
    if (parsed.point) {
        request.points.push_back(*parsed.point);
    } else {
        request.box = parsed.box;
    }
    PredictionTriple triple = segmenter.predict(request);
    validate_triple(triple, state_.width, state_.height);
    const int pre = preselect(state_, k, triple, &ground_truth);

    nlohmann::json stored_prompt = parsed.point ? nlohmann::json{{"point", wire::encode_point(*parsed.point)}}
                                                : nlohmann::json{{"box", wire::encode_box(*parsed.box)}};
    commit({"prompt",
            {{"slice", k},
             {"prompt", std::move(stored_prompt)},
             {"candidates", wire::encode_triple(triple)},
             {"preselected_index", pre}},
            {}});
    return {std::move(triple), pre, static_cast<int>(request.points.size()) + (request.box ? 1 : 0)};
}

void AnnotationSession::select(int k, int index) {
    std::lock_guard lock(mutex_);
    commit({"select", {{"slice", k}, {"index", index}}, {}});
}

void AnnotationSession::finalize(int k) {
    std::lock_guard lock(mutex_);
    commit({"finalize", {{"slice", k}}, {}});
}

}  // namespace promptseg
