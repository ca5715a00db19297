// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>

#include <fmt/format.h>
#include <httplib.h>

#include "promptseg/errors.hpp"
#include "promptseg/segmenter.hpp"
#include "promptseg/wire.hpp"

namespace promptseg {

namespace {

std::chrono::microseconds to_duration(double seconds) {
    return std::chrono::microseconds(static_cast<std::int64_t>(seconds * 1e6));
}

}  // namespace

// Bounds the number of concurrent requests.
struct ExternalSegmenter::Pool {
    explicit Pool(int size) : available(size) {}

    void acquire() {
        std::unique_lock lock(mutex);
        cv.wait(lock, [this] { return available > 0; });
        --available;
    }
    void release() {
        {
            std::lock_guard lock(mutex);
            ++available;
        }
        cv.notify_one();
    }

    std::mutex mutex;
    std::condition_variable cv;
    int available;
};

namespace {

class Lease {
public:
    template <typename P>
    explicit Lease(P& pool) : release_([&pool] { pool.release(); }) {
        pool.acquire();
    }
    ~Lease() { release_(); }
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;

private:
    std::function<void()> release_;
};

httplib::Client make_client(const ExternalBackendOptions& options) {
    httplib::Client client(options.endpoint);
    if (!client.is_valid()) {
        throw TransportError(fmt::format("invalid backend endpoint '{}'", options.endpoint));
    }
    const auto timeout = to_duration(options.timeout_s);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    return client;
}

[[noreturn]] void raise_transport(const ExternalBackendOptions& options, httplib::Error error,
                                  std::chrono::steady_clock::duration elapsed) {
    const bool timed_out = error == httplib::Error::ConnectionTimeout ||
                           (error == httplib::Error::Read && elapsed >= to_duration(options.timeout_s * 0.9));
    const auto message = fmt::format("backend {}: {}", options.endpoint, httplib::to_string(error));
    if (timed_out) {
        throw TimeoutError(message + " (timeout)");
    }
    throw TransportError(message);
}

nlohmann::json parse_body(const std::string& body) {
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(fmt::format("malformed JSON from backend: {}", e.what()));
    }
}

}  // namespace

ExternalSegmenter::ExternalSegmenter(ExternalBackendOptions options)
    : options_(std::move(options)), pool_(std::make_unique<Pool>(std::max(1, options_.pool_size))) {
    if (options_.endpoint.empty()) {
        throw ConfigError("backend.endpoint: required for the external backend");
    }
    if (!(options_.timeout_s > 0.0)) {
        throw ConfigError("backend.timeout_s: must be positive");
    }
}

ExternalSegmenter::~ExternalSegmenter() = default;

PredictionTriple ExternalSegmenter::predict(const SegmentationRequest& request) const {
    validate_request(request);
    const std::string payload = wire::encode_request(request).dump();

    Lease lease(*pool_);
    auto client = make_client(options_);
    const auto start = std::chrono::steady_clock::now();
    auto response = client.Post("/v1/predict", payload, "application/json");
    if (!response) {
        raise_transport(options_, response.error(), std::chrono::steady_clock::now() - start);
    }
    if (response->status != 200) {
        throw BackendError(fmt::format("backend {} answered HTTP {}: {}", options_.endpoint, response->status,
                                       response->body.substr(0, 200)));
    }
    try {
        return wire::decode_triple(parse_body(response->body), request.image.width, request.image.height);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(fmt::format("backend response: {}", e.what()));
    }
}

void ExternalSegmenter::health_check() const {
    (void)model_id();
}

std::string ExternalSegmenter::model_id() const {
    Lease lease(*pool_);
    auto client = make_client(options_);
    const auto start = std::chrono::steady_clock::now();
    auto response = client.Get("/v1/health");
    if (!response) {
        raise_transport(options_, response.error(), std::chrono::steady_clock::now() - start);
    }
    if (response->status != 200) {
        throw BackendError(fmt::format("backend {} health: HTTP {}", options_.endpoint, response->status));
    }
    const auto body = parse_body(response->body);
    if (!body.is_object() || body.value("status", "") != "ok" || !body.contains("model") ||
        !body.at("model").is_string()) {
        throw ProtocolError("health response must be {\"status\":\"ok\",\"model\":\"<id>\"}");
    }
    return body.at("model").get<std::string>();
}

}  // namespace promptseg
