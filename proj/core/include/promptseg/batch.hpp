// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "promptseg/config.hpp"
#include "promptseg/prompt_sim.hpp"
#include "promptseg/segmenter.hpp"

namespace promptseg {

struct EvaluateOptions {
    /// Reuse per-case checkpoints of an interrupted run with the same config.
    bool resume = false;
    /// Called after each case's checkpoint is durable (from worker threads).
    std::function<void(const std::string& case_id)> on_case_done;
};

struct EvaluateSummary {
    std::size_t n_cases = 0;
    std::size_t n_resumed = 0;
    std::size_t n_records = 0;
    std::size_t n_failed = 0;
    std::filesystem::path records_jsonl;
    std::filesystem::path records_csv;
    std::filesystem::path failures;
    std::filesystem::path run_manifest;
};

/// Evaluates every case × orientation × policy × crop variant of the config
/// on a pool of `parallelism` workers (one case per task). Writes
/// `records.jsonl`, `records.csv`, `failures.json` and `run_manifest.json`
/// to the output directory; record files are sorted, so their content does
/// not depend on the degree of parallelism. Per-case checkpoints live in
/// `checkpoints/`.
EvaluateSummary run_evaluation(const ExperimentConfig& config, const BackendProvider& backends,
                               const EvaluateOptions& options = {});

/// Every configured variant of one case, sorted.
std::vector<EvalRecord> evaluate_case_grid(const ExperimentConfig& config, const CaseVolumes& volumes,
                                           const BackendProvider& backends);

}  // namespace promptseg
