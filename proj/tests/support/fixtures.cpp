// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <random>

#include <httplib.h>
#include <unistd.h>

namespace promptseg::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("promptseg-test-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
             std::to_string(counter++));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

StubServer::StubServer(const std::function<void(httplib::Server&)>& routes)
    : server_(std::make_unique<httplib::Server>()) {
    routes(*server_);
    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

StubServer::~StubServer() {
    server_->stop();
    thread_.join();
}

std::vector<PhantomSpec> small_phantoms(int count, int size) {
    std::vector<PhantomSpec> specs;
    for (int i = 0; i < count; ++i) {
        PhantomSpec s;
        s.case_id = "case_" + std::to_string(i + 1);
        s.grade = i % 2 == 0 ? Grade::HGG : Grade::LGG;
        s.dims = {size, size, size};
        s.radius = size / 4.0 + i % 2;
        s.necrotic_fraction = i % 2 == 0 ? 0.4 : 0.0;
        s.seed = 11 + static_cast<std::uint32_t>(i);
        specs.push_back(s);
    }
    return specs;
}

fs::path write_experiment(const fs::path& dir, const nlohmann::json& overrides, const std::vector<PhantomSpec>& specs) {
    write_phantom_dataset(dir / "data", specs);
    nlohmann::json config = {{"dataset_root", "data"}, {"output_dir", "out"}, {"backend", {{"kind", "reference"}}}};
    if (overrides.is_object()) {
        config.update(overrides);
    }
    const auto path = dir / "config.json";
    std::ofstream(path) << config.dump(2);
    return path;
}

void planted_step(std::uint32_t seed, std::vector<double>& area, std::vector<double>& iou) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    area.clear();
    iou.clear();
    for (int a = 50; a <= 800; a += 10) {
        for (int rep = 0; rep < 3; ++rep) {
            area.push_back(a);
            iou.push_back(std::clamp((a < 300 ? 0.3 : 0.85) + noise(rng), 0.0, 1.0));
        }
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace promptseg::testing
