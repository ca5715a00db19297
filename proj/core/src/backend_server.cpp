// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/backend_server.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include "promptseg/errors.hpp"
#include "promptseg/wire.hpp"

namespace promptseg {

struct BackendServer::Impl {
    std::shared_ptr<const Segmenter> segmenter;
    httplib::Server server;
};

BackendServer::BackendServer(std::shared_ptr<const Segmenter> segmenter) : impl_(std::make_unique<Impl>()) {
    impl_->segmenter = std::move(segmenter);
    auto* impl = impl_.get();
    impl->server.Get("/v1/health", [impl](const httplib::Request&, httplib::Response& res) {
        res.set_content(nlohmann::json{{"status", "ok"}, {"model", impl->segmenter->model_id()}}.dump(),
                        "application/json");
    });
    impl->server.Post("/v1/predict", [impl](const httplib::Request& req, httplib::Response& res) {
        auto fail = [&](int status, const std::string& message) {
            res.status = status;
            res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
        };
        SegmentationRequest request;
        try {
            request = wire::decode_request(nlohmann::json::parse(req.body));
            validate_request(request);
        } catch (const std::exception& e) {
            return fail(400, e.what());
        }
        try {
            res.set_content(wire::encode_triple(impl->segmenter->predict(request)).dump(), "application/json");
        } catch (const std::exception& e) {
            fail(500, e.what());
        }
    });
}

BackendServer::~BackendServer() { stop(); }

int BackendServer::bind(const std::string& host, int port) {
    const int bound =
        port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        throw IoError(fmt::format("cannot bind {}:{}", host, port));
    }
    return bound;
}

void BackendServer::listen() { impl_->server.listen_after_bind(); }

void BackendServer::stop() {
    if (impl_) {
        impl_->server.stop();
    }
}

}  // namespace promptseg
