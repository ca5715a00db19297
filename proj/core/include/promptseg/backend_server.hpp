// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "promptseg/segmenter.hpp"

namespace promptseg {

/// Serves a segmenter over the external-backend wire protocol:
/// `POST /v1/predict` and `GET /v1/health`.
class BackendServer {
public:
    explicit BackendServer(std::shared_ptr<const Segmenter> segmenter);
    ~BackendServer();
    BackendServer(const BackendServer&) = delete;
    BackendServer& operator=(const BackendServer&) = delete;

    /// Port 0 picks a free port; returns the bound port.
    int bind(const std::string& host, int port);
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace promptseg
