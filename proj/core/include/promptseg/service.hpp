// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "promptseg/annotation.hpp"
#include "promptseg/config.hpp"
#include "promptseg/segmenter.hpp"

namespace promptseg {

struct ServiceOptions {
    std::filesystem::path dataset_root;
    Manifest manifest;
    std::set<int> core_labels = kDefaultCoreLabels;
    /// Session event logs; existing logs are replayed at startup.
    std::filesystem::path sessions_dir;
    /// Served under `/` when set (the web UI bundle).
    std::optional<std::filesystem::path> static_dir;
    AnnotationSession::Clock clock;
};

ServiceOptions service_options(const ExperimentConfig& config);

/// HTTP service behind the interactive annotation UI.
///
///     GET  /v1/health
///     GET  /v1/cases
///     GET  /v1/cases/{id}
///     GET  /v1/cases/{id}/slices/{orientation}/{k}      PNG, X-GT-Available
///     GET  /v1/cases/{id}/slices/{orientation}/{k}/gt   RLE
///     POST /v1/sessions                                 {case_id, orientation, policy}
///     GET  /v1/sessions/{id}
///     POST /v1/sessions/{id}/slices/{k}/prompts         {point} | {box}
///     POST /v1/sessions/{id}/slices/{k}/select          {index}
///     POST /v1/sessions/{id}/slices/{k}/finalize
///     POST /v1/sessions/{id}/fuse                       {sessions?: [id, id]}
///     GET  /v1/sessions/{id}/export                     NIfTI
///
/// Errors are `{"error": message}` with 400 for malformed bodies, 404 for
/// unknown resources, 409 for mutations of finalized slices, 422 for
/// malformed prompts and 502 for backend failures.
class Service {
public:
    Service(ServiceOptions options, std::shared_ptr<const BackendProvider> backends);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds without serving. Port 0 picks a free port; returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); requires bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace promptseg
