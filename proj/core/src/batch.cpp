// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/batch.hpp"

#include <algorithm>
#include <cctype>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "promptseg/errors.hpp"
#include "promptseg/records.hpp"

namespace promptseg {

namespace {

namespace fs = std::filesystem;

std::string checkpoint_name(const std::string& case_id) {
    std::string name;
    for (const char ch : case_id) {
        const bool safe = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
        name += safe ? std::string(1, ch) : fmt::format("%{:02X}", static_cast<unsigned char>(ch));
    }
    return name + ".jsonl";
}

void write_atomically(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        out.flush();
        if (!out) {
            throw IoError(fmt::format("writing '{}' failed", tmp.string()));
        }
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string utc_timestamp() {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                    std::chrono::system_clock::now())));
}

}  // namespace

std::vector<EvalRecord> evaluate_case_grid(const ExperimentConfig& config, const CaseVolumes& volumes,
                                           const BackendProvider& backends) {
    const auto settings = config.evaluation_settings();
    std::vector<EvalRecord> records;
    for (const auto orientation : config.orientations) {
        for (const auto policy : config.policies) {
            for (const bool cropped : config.cropped) {
                auto part = evaluate_case(volumes, orientation, policy, cropped, backends, settings);
                records.insert(records.end(), std::make_move_iterator(part.begin()),
                               std::make_move_iterator(part.end()));
            }
        }
    }
    sort_records(records);
    return records;
}

EvaluateSummary run_evaluation(const ExperimentConfig& config, const BackendProvider& backends,
                               const EvaluateOptions& options) {
    const fs::path out_dir = config.output_dir;
    const fs::path checkpoints = out_dir / "checkpoints";
    const std::string hash = config_hash(config);
    const fs::path hash_file = checkpoints / "config_hash";

    fs::create_directories(out_dir);
    if (options.resume && fs::exists(hash_file)) {
        if (read_text(hash_file) != hash) {
            throw ConfigError("--resume: checkpoints were written by a different configuration");
        }
    } else {
        fs::remove_all(checkpoints);
    }
    fs::create_directories(checkpoints);
    write_atomically(hash_file, hash);

    const auto& cases = config.manifest.cases;
    std::vector<std::vector<EvalRecord>> results(cases.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> resumed{0};
    std::atomic<bool> abort{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cases.size() || abort.load()) {
                return;
            }
            const auto& entry = cases[i];
            const fs::path checkpoint = checkpoints / checkpoint_name(entry.id);
            try {
                if (options.resume && fs::exists(checkpoint)) {
                    results[i] = read_jsonl(checkpoint);
                    ++resumed;
                    continue;
                }
                const CaseVolumes volumes = load_case(config.dataset_root, entry);
                results[i] = evaluate_case_grid(config, volumes, backends);
                std::ostringstream text;
                write_jsonl(text, results[i]);
                write_atomically(checkpoint, text.str());
                if (options.on_case_done) {
                    options.on_case_done(entry.id);
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                abort = true;
                return;
            }
        }
    };

    const auto workers = static_cast<std::size_t>(std::max(1, config.parallelism));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, std::max<std::size_t>(cases.size(), 1)); ++w) {
            pool.emplace_back(worker);
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }

    std::vector<EvalRecord> records;
    for (auto& part : results) {
        records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    sort_records(records);

    EvaluateSummary summary;
    summary.n_cases = cases.size();
    summary.n_resumed = resumed.load();
    summary.n_records = records.size();
    summary.records_jsonl = out_dir / "records.jsonl";
    summary.records_csv = out_dir / "records.csv";
    summary.failures = out_dir / "failures.json";
    summary.run_manifest = out_dir / "run_manifest.json";

    nlohmann::json failures = {{"total_failed", 0}, {"by_case", nlohmann::json::object()}, {"errors", nlohmann::json::array()}};
    for (const auto& r : records) {
        if (!r.failed) {
            continue;
        }
        ++summary.n_failed;
        failures["by_case"][r.case_id] = failures["by_case"].value(r.case_id, 0) + 1;
        failures["errors"].push_back({{"case_id", r.case_id},
                                      {"orientation", to_string(r.orientation)},
                                      {"slice_index", r.slice_index},
                                      {"policy", to_string(r.policy)},
                                      {"cropped", r.cropped},
                                      {"error", r.error}});
    }
    failures["total_failed"] = summary.n_failed;

    std::ostringstream jsonl;
    write_jsonl(jsonl, records);
    write_atomically(summary.records_jsonl, jsonl.str());
    std::ostringstream csv;
    write_csv(csv, records);
    write_atomically(summary.records_csv, csv.str());
    write_atomically(summary.failures, failures.dump(2) + "\n");

    const nlohmann::json manifest = {
        {"config_hash", hash},
        {"backend_id", backends.backend_id()},
        {"timestamp", utc_timestamp()},
        {"n_cases", summary.n_cases},
        {"n_resumed_cases", summary.n_resumed},
        {"n_records", summary.n_records},
        {"n_failed", summary.n_failed},
        {"config", canonical_config(config)},
    };
    write_atomically(summary.run_manifest, manifest.dump(2) + "\n");
    return summary;
}

}  // namespace promptseg
