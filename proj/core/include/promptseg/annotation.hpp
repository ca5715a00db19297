// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptseg/mask.hpp"
#include "promptseg/prompt_sim.hpp"
#include "promptseg/segmenter.hpp"
#include "promptseg/volume.hpp"

namespace promptseg {

struct SliceAnnotation {
    std::vector<PointPrompt> points;
    std::optional<BoxPrompt> box;
    std::optional<PredictionTriple> candidates;
    int preselected_index = -1;
    int chosen_index = -1;
    bool finalized = false;

    friend bool operator==(const SliceAnnotation&, const SliceAnnotation&) = default;
};

struct SessionState {
    std::string id;
    std::string case_id;
    Orientation orientation = Orientation::Transversal;
    PolicyKind policy = PolicyKind::PreviousSlice;
    int width = 0;
    int height = 0;
    int n_slices = 0;
    int current_slice = 0;
    std::map<int, SliceAnnotation> slices;
    std::string persisted_at;

    /// The chosen candidate of a slice, or an empty mask when nothing was chosen.
    BinaryMask2D chosen_mask(int k) const;
    std::vector<int> finalized_slices() const;

    friend bool operator==(const SessionState&, const SessionState&) = default;
};

/// One mutation. `type` is `created`, `prompt`, `select` or `finalize`.
/// Prompt events carry the backend's answer, so replay never calls a backend.
struct SessionEvent {
    std::string type;
    nlohmann::json data;
    std::string at;

    friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

void to_json(nlohmann::json& j, const SessionEvent& e);
void from_json(const nlohmann::json& j, SessionEvent& e);

/// Validates and applies one event. Throws ConflictError for a mutation of a
/// finalized slice, InvalidPromptError for a prompt or selection that does
/// not fit the slice, NotFoundError for a slice index out of range.
void apply_event(SessionState& state, const SessionEvent& event);
SessionState replay(const std::vector<SessionEvent>& events);

/// Index suggested for slice `k`. Oracle sessions use the ground truth when
/// given. Previous-slice sessions compare against the nearest finalized slice
/// and fall back to the highest predicted IoU when none exists.
int preselect(const SessionState& state, int k, const PredictionTriple& triple, const BinaryMask2D* ground_truth);

/// Client view of the state: per-slice prompts, candidates as RLE, chosen
/// index and finalized flag.
nlohmann::json to_json(const SessionState& state);

struct PromptOutcome {
    PredictionTriple candidates;
    int preselected_index = -1;
    int n_prompts = 0;
};

/// A session whose event log is rewritten to `<dir>/<id>.json` after every
/// mutation. Mutations are serialized; a failed mutation leaves both the
/// state and the file untouched.
class AnnotationSession {
public:
    using Clock = std::function<std::string()>;

    static std::unique_ptr<AnnotationSession> create(const std::filesystem::path& dir, std::string id,
                                                     std::string case_id, Orientation orientation, PolicyKind policy,
                                                     const Dims3& dims, Clock clock = {});
    static std::unique_ptr<AnnotationSession> load(const std::filesystem::path& file, Clock clock = {});

    SessionState state() const;
    std::vector<SessionEvent> events() const;
    const std::filesystem::path& file() const noexcept { return file_; }

    /// `prompt` is `{"point":{"x","y","label"}}` or `{"box":{"min","max"}}`.
    PromptOutcome add_prompt(int k, const nlohmann::json& prompt, const SliceImage& image,
                             const BinaryMask2D& ground_truth, const Segmenter& segmenter);
    void select(int k, int index);
    void finalize(int k);

private:
    AnnotationSession(std::filesystem::path file, Clock clock);
    void commit(SessionEvent event);

    mutable std::mutex mutex_;
    std::filesystem::path file_;
    Clock clock_;
    std::vector<SessionEvent> events_;
    SessionState state_;
};

/// UTC with millisecond resolution, e.g. `2024-05-01T12:00:00.123Z`.
std::string utc_now_millis();

}  // namespace promptseg
