// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/service.hpp"

#include <map>
#include <mutex>
#include <shared_mutex>

#include <fmt/format.h>
#include <httplib.h>
#include <sodium.h>

#include "promptseg/errors.hpp"
#include "promptseg/fusion.hpp"
#include "promptseg/nifti.hpp"
#include "promptseg/png_writer.hpp"
#include "promptseg/wire.hpp"

namespace promptseg {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CaseData {
    const CaseEntry* entry = nullptr;
    Volume normalized;
    Volume core;
};

class BadRequest : public Error {
public:
    using Error::Error;
};

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const NotFoundError& e) {
        send_json(res, 404, {{"error", e.what()}});
    } catch (const ConflictError& e) {
        send_json(res, 409, {{"error", e.what()}});
    } catch (const InvalidPromptError& e) {
        send_json(res, 422, {{"error", e.what()}});
    } catch (const BackendError& e) {
        send_json(res, 502, {{"error", e.what()}});
    } catch (const BoundsError& e) {
        send_json(res, 404, {{"error", e.what()}});
    } catch (const BadRequest& e) {
        send_json(res, 400, {{"error", e.what()}});
    } catch (const ConfigError& e) {
        send_json(res, 400, {{"error", e.what()}});
    } catch (const json::exception& e) {
        send_json(res, 400, {{"error", fmt::format("malformed request body: {}", e.what())}});
    } catch (const std::exception& e) {
        send_json(res, 500, {{"error", e.what()}});
    }
}

json parse_body(const httplib::Request& req, bool prompt) {
    if (req.body.empty()) {
        return json::object();
    }
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        if (prompt) {
            throw InvalidPromptError(fmt::format("prompt body is not JSON: {}", e.what()));
        }
        throw BadRequest(fmt::format("request body is not JSON: {}", e.what()));
    }
}

int parse_int(const std::string& text) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used == text.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw NotFoundError(fmt::format("'{}' is not a slice index", text));
}

Orientation route_orientation(const std::string& text) {
    try {
        return parse_orientation(text);
    } catch (const std::exception&) {
        throw NotFoundError(fmt::format("unknown orientation '{}'", text));
    }
}

std::string new_session_id() {
    std::array<unsigned char, 12> bytes{};
    randombytes_buf(bytes.data(), bytes.size());
    std::string hex(bytes.size() * 2 + 1, '\0');
    sodium_bin2hex(hex.data(), hex.size(), bytes.data(), bytes.size());
    hex.pop_back();
    return hex;
}

StackedSegmentation stack_session(const SessionState& s, const Volume& reference) {
    std::vector<SliceMask> slices;
    for (const int k : s.finalized_slices()) {
        slices.emplace_back(k, s.chosen_mask(k));
    }
    return stack_slices(reference.dims(), reference.spacing(), s.orientation, slices);
}

}  // namespace

ServiceOptions service_options(const ExperimentConfig& config) {
    ServiceOptions o;
    o.dataset_root = config.dataset_root;
    o.manifest = config.manifest;
    o.core_labels = config.core_labels;
    o.sessions_dir = config.output_dir / "sessions";
    return o;
}

struct Service::Impl {
    ServiceOptions options;
    std::shared_ptr<const BackendProvider> backends;
    httplib::Server server;

    std::mutex cases_mutex;
    std::map<std::string, std::shared_ptr<const CaseData>> cases;
    std::shared_mutex sessions_mutex;
    std::map<std::string, std::shared_ptr<AnnotationSession>> sessions;

    std::shared_ptr<const CaseData> case_data(const std::string& id) {
        const CaseEntry* entry = options.manifest.find(id);
        if (entry == nullptr) {
            throw NotFoundError(fmt::format("unknown case '{}'", id));
        }
        {
            std::lock_guard lock(cases_mutex);
            if (const auto it = cases.find(id); it != cases.end()) {
                return it->second;
            }
        }
        const CaseVolumes volumes = load_case(options.dataset_root, *entry);
        auto data = std::make_shared<CaseData>(CaseData{entry, normalize_intensities(volumes.intensity),
                                                        tumor_core_mask(volumes.labels, options.core_labels)});
        std::lock_guard lock(cases_mutex);
        return cases.emplace(id, std::move(data)).first->second;
    }

    std::shared_ptr<AnnotationSession> session(const std::string& id) {
        std::shared_lock lock(sessions_mutex);
        const auto it = sessions.find(id);
        if (it == sessions.end()) {
            throw NotFoundError(fmt::format("unknown session '{}'", id));
        }
        return it->second;
    }

    void load_sessions() {
        if (!fs::is_directory(options.sessions_dir)) {
            return;
        }
        for (const auto& entry : fs::directory_iterator(options.sessions_dir)) {
            if (entry.path().extension() != ".json") {
                continue;
            }
            std::shared_ptr<AnnotationSession> s = AnnotationSession::load(entry.path(), options.clock);
            sessions.emplace(s->state().id, std::move(s));
        }
    }

    void routes();
};

void Service::Impl::routes() {
    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, {{"status", "ok"}, {"backend", backends->backend_id()}}); });
    });

    server.Get("/v1/cases", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            json list = json::array();
            for (const auto& c : options.manifest.cases) {
                list.push_back({{"case_id", c.id}, {"grade", to_string(c.grade)}});
            }
            send_json(res, 200, list);
        });
    });

    server.Get(R"(/v1/cases/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto data = case_data(req.matches[1]);
            const auto d = data->normalized.dims();
            json slices = json::object();
            for (const auto o : {Orientation::Transversal, Orientation::Coronal, Orientation::Sagittal}) {
                const auto shape = slice_shape(d, o);
                slices[std::string(to_string(o))] = {
                    {"count", slice_count(d, o)}, {"width", shape[0]}, {"height", shape[1]}};
            }
            send_json(res, 200,
                      {{"case_id", data->entry->id},
                       {"grade", to_string(data->entry->grade)},
                       {"dims", d},
                       {"spacing", data->normalized.spacing()},
                       {"slices", std::move(slices)}});
        });
    });

    server.Get(R"(/v1/cases/([^/]+)/slices/([^/]+)/(-?\d+))", [this](const httplib::Request& req,
                                                                   httplib::Response& res) {
        guarded(res, [&] {
            const auto data = case_data(req.matches[1]);
            const auto o = route_orientation(req.matches[2]);
            const int k = parse_int(req.matches[3]);
            const SliceImage image = extract_slice(data->normalized, o, k);
            const bool gt = !extract_mask(data->core, o, k).empty_mask();
            const auto png = encode_png_gray({image.width, image.height, image.gray_pixels()});
            res.status = 200;
            res.set_header("X-GT-Available", gt ? "true" : "false");
            res.set_header("X-Slice-Count", std::to_string(slice_count(data->normalized.dims(), o)));
            res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
        });
    });

    server.Get(R"(/v1/cases/([^/]+)/slices/([^/]+)/(-?\d+)/gt)", [this](const httplib::Request& req,
                                                                      httplib::Response& res) {
        guarded(res, [&] {
            const auto data = case_data(req.matches[1]);
            const auto o = route_orientation(req.matches[2]);
            const int k = parse_int(req.matches[3]);
            if (k < 0 || k >= slice_count(data->core.dims(), o)) {
                throw NotFoundError(fmt::format("slice {} out of range", k));
            }
            send_json(res, 200, rle_encode(extract_mask(data->core, o, k)));
        });
    });

    server.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const json body = parse_body(req, false);
            if (!body.contains("case_id") || !body.at("case_id").is_string()) {
                throw BadRequest("case_id is required");
            }
            const auto data = case_data(body.at("case_id").get<std::string>());
            Orientation o = Orientation::Transversal;
            PolicyKind policy = PolicyKind::PreviousSlice;
            try {
                o = parse_orientation(body.value("orientation", std::string("transversal")));
                policy = parse_policy(body.value("policy", std::string("previous_slice")));
            } catch (const std::exception& e) {
                throw BadRequest(e.what());
            }
            std::shared_ptr<AnnotationSession> s = AnnotationSession::create(
                options.sessions_dir, new_session_id(), data->entry->id, o, policy, data->normalized.dims(),
                options.clock);
            const json view = to_json(s->state());
            {
                std::unique_lock lock(sessions_mutex);
                sessions.emplace(s->state().id, std::move(s));
            }
            send_json(res, 201, view);
        });
    });

    server.Get(R"(/v1/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, to_json(session(req.matches[1])->state())); });
    });

    server.Post(R"(/v1/sessions/([^/]+)/slices/(-?\d+)/prompts)", [this](const httplib::Request& req,
                                                                       httplib::Response& res) {
        guarded(res, [&] {
            const auto s = session(req.matches[1]);
            const int k = parse_int(req.matches[2]);
            const json body = parse_body(req, true);
            const SessionState state = s->state();
            const auto data = case_data(state.case_id);
            if (k < 0 || k >= state.n_slices) {
                throw NotFoundError(fmt::format("slice {} is outside [0, {})", k, state.n_slices));
            }
            const SliceImage image = extract_slice(data->normalized, state.orientation, k);
            const BinaryMask2D gt = extract_mask(data->core, state.orientation, k);
            const auto segmenter = backends->for_slice(gt);
            const PromptOutcome outcome = s->add_prompt(k, body, image, gt, *segmenter);
            json out = wire::encode_triple(outcome.candidates);
            send_json(res, 200,
                      {{"slice", k},
                       {"candidates", out.at("masks")},
                       {"predicted_iou", out.at("predicted_iou")},
                       {"preselected_index", outcome.preselected_index},
                       {"n_prompts", outcome.n_prompts}});
        });
    });

    server.Post(R"(/v1/sessions/([^/]+)/slices/(-?\d+)/select)", [this](const httplib::Request& req,
                                                                      httplib::Response& res) {
        guarded(res, [&] {
            const auto s = session(req.matches[1]);
            const int k = parse_int(req.matches[2]);
            const json body = parse_body(req, true);
            if (!body.contains("index") || !body.at("index").is_number_integer()) {
                throw InvalidPromptError("index must be an integer");
            }
            s->select(k, body.at("index").get<int>());
            send_json(res, 200, to_json(s->state()));
        });
    });

    server.Post(R"(/v1/sessions/([^/]+)/slices/(-?\d+)/finalize)", [this](const httplib::Request& req,
                                                                        httplib::Response& res) {
        guarded(res, [&] {
            const auto s = session(req.matches[1]);
            s->finalize(parse_int(req.matches[2]));
            send_json(res, 200, to_json(s->state()));
        });
    });

    server.Post(R"(/v1/sessions/([^/]+)/fuse)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const SessionState main = session(req.matches[1])->state();
            const json body = parse_body(req, false);
            std::vector<SessionState> states{main};
            for (const auto& id : body.value("sessions", json::array())) {
                states.push_back(session(id.get<std::string>())->state());
                if (states.back().case_id != main.case_id) {
                    throw BadRequest("fused sessions must annotate the same case");
                }
            }
            const auto data = case_data(main.case_id);
            std::map<Orientation, Volume> stacks;
            json out = {{"case_id", main.case_id}, {"dice", json::object()}, {"covered_slices", json::object()}};
            for (const auto& st : states) {
                if (stacks.count(st.orientation) != 0) {
                    throw BadRequest(fmt::format("two sessions annotate orientation {}", to_string(st.orientation)));
                }
                auto stacked = stack_session(st, data->core);
                const std::string key(to_string(st.orientation));
                out["dice"][key] = volumetric_dice(stacked.volume, data->core);
                out["covered_slices"][key] = stacked.covered_slices;
                stacks.emplace(st.orientation, std::move(stacked.volume));
            }
            if (stacks.size() == 3) {
                out["dice_majority"] = volumetric_dice(
                    majority_vote(stacks.at(Orientation::Transversal), stacks.at(Orientation::Coronal),
                                  stacks.at(Orientation::Sagittal)),
                    data->core);
            } else {
                out["warnings"] = json::array({"majority vote needs all three orientations"});
            }
            send_json(res, 200, out);
        });
    });

    server.Get(R"(/v1/sessions/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const SessionState st = session(req.matches[1])->state();
            const auto data = case_data(st.case_id);
            const auto stacked = stack_session(st, data->core);
            const auto bytes = encode_nifti(stacked.volume, NiftiDatatype::UInt8);
            res.status = 200;
            res.set_header("Content-Disposition",
                           fmt::format("attachment; filename=\"{}_{}.nii\"", st.case_id, to_string(st.orientation)));
            res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "application/octet-stream");
        });
    });
}

Service::Service(ServiceOptions options, std::shared_ptr<const BackendProvider> backends)
    : impl_(std::make_unique<Impl>()) {
    if (sodium_init() < 0) {
        throw Error("libsodium initialization failed");
    }
    impl_->options = std::move(options);
    impl_->backends = std::move(backends);
    fs::create_directories(impl_->options.sessions_dir);
    impl_->load_sessions();
    impl_->routes();
    if (impl_->options.static_dir) {
        impl_->server.set_mount_point("/", impl_->options.static_dir->string());
    }
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        throw IoError(fmt::format("cannot bind {}:{}", host, port));
    }
    return bound;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_) {
        impl_->server.stop();
    }
}

}  // namespace promptseg
