// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptseg/phantom.hpp"

namespace httplib {
class Server;
}

namespace promptseg::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// httplib server on a loopback port, served from a background thread.
class StubServer {
public:
    explicit StubServer(const std::function<void(httplib::Server&)>& routes);
    ~StubServer();

    int port() const noexcept { return port_; }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

/// Runs a blocking `listen()` of an already bound server on a thread and
/// calls `stop()` on destruction.
template <typename ServerT>
class Serving {
public:
    explicit Serving(ServerT& server) : server_(server), thread_([&server] { server.listen(); }) {}
    ~Serving() {
        server_.stop();
        thread_.join();
    }

private:
    ServerT& server_;
    std::thread thread_;
};

/// Small phantoms: two cases, 32³ by default.
std::vector<PhantomSpec> small_phantoms(int count = 2, int size = 32);

/// Writes phantoms plus `config.json` into `dir`; returns the config path.
std::filesystem::path write_experiment(const std::filesystem::path& dir, const nlohmann::json& overrides,
                                       const std::vector<PhantomSpec>& specs);

/// Tumor areas in mm² (multiples of 10 between 50 and 800) with IoU near
/// 0.3 below 300 and near 0.85 from 300 on, plus Gaussian noise of σ 0.05.
void planted_step(std::uint32_t seed, std::vector<double>& area, std::vector<double>& iou);

std::string read_file(const std::filesystem::path& path);

}  // namespace promptseg::testing
