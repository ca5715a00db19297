// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <cstdlib>
#include <fstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "promptseg/backend_server.hpp"
#include "promptseg/batch.hpp"
#include "promptseg/config.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/fuse_command.hpp"
#include "promptseg/manifest.hpp"
#include "promptseg/phantom.hpp"
#include "promptseg/records.hpp"
#include "promptseg/report.hpp"
#include "promptseg/service.hpp"

namespace fs = std::filesystem;
using namespace promptseg;

namespace {

constexpr int kExitBadInput = 2;
constexpr int kExitBackend = 3;

// Set from the signal handler; the running server is stopped from main.
std::function<void()> g_stop;

void on_signal(int) {
    if (g_stop) {
        g_stop();
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw IoError(fmt::format("cannot write '{}'", path.string()));
    }
}

int run_evaluate(const fs::path& config_path, bool resume) {
    ExperimentConfig config;
    try {
        config = load_config(config_path);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "invalid config: {}\n", e.what());
        return kExitBadInput;
    }
    BackendProvider backends(config.backend);
    try {
        backends.health_check();
    } catch (const BackendError& e) {
        fmt::print(stderr, "backend health check failed: {}\n", e.what());
        return kExitBackend;
    }
    EvaluateOptions options;
    options.resume = resume;
    options.on_case_done = [](const std::string& id) { fmt::print(stderr, "done: {}\n", id); };
    EvaluateSummary summary;
    try {
        summary = run_evaluation(config, backends, options);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "{}\n", e.what());
        return kExitBadInput;
    }
    fmt::print("{} cases ({} resumed), {} records, {} failed\n{}\n", summary.n_cases, summary.n_resumed,
               summary.n_records, summary.n_failed, summary.records_jsonl.string());
    return 0;
}

std::set<int> parse_labels(const std::vector<int>& labels) {
    return labels.empty() ? kDefaultCoreLabels : std::set<int>(labels.begin(), labels.end());
}

int run_fuse(const fs::path& records_path, const fs::path& dataset, std::string manifest_path,
             const std::string& policy, bool cropped, const std::vector<int>& labels, fs::path out_dir,
             const std::string& export_dir) {
    const auto records = read_jsonl(records_path);
    if (records.empty()) {
        fmt::print(stderr, "no records in '{}'\n", records_path.string());
        return kExitBadInput;
    }
    const fs::path manifest_file = manifest_path.empty() ? dataset / "manifest.json" : fs::path(manifest_path);
    Manifest manifest;
    FuseOptions options;
    try {
        manifest = read_manifest(manifest_file);
        options.policy = parse_policy(policy);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "{}\n", e.what());
        return kExitBadInput;
    }
    options.cropped = cropped;
    options.core_labels = parse_labels(labels);
    if (!export_dir.empty()) {
        options.export_dir = export_dir;
    }
    const FusionReport report = fuse_records(records, dataset, manifest, options);
    if (out_dir.empty()) {
        out_dir = records_path.parent_path();
    }
    fs::create_directories(out_dir);
    write_text(out_dir / "fusion.json", to_json(report).dump(2) + "\n");
    const std::string md = to_markdown(report);
    write_text(out_dir / "fusion.md", md);
    fmt::print("{}", md);
    return 0;
}

int run_report(const fs::path& records_path, fs::path out_dir) {
    std::vector<EvalRecord> records;
    if (fs::exists(records_path)) {
        records = read_jsonl(records_path);
    }
    if (records.empty()) {
        fmt::print(stderr, "no records in '{}'\n", records_path.string());
        return kExitBadInput;
    }
    if (out_dir.empty()) {
        out_dir = records_path.parent_path() / "report";
    }
    const AggregateReport report = aggregate_report(records);
    write_report(out_dir, report);
    fmt::print("{}", to_markdown(report));
    return 0;
}

int run_serve(const fs::path& config_path, const std::string& host, int port, const std::string& static_dir) {
    ExperimentConfig config;
    try {
        config = load_config(config_path);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "invalid config: {}\n", e.what());
        return kExitBadInput;
    }
    auto backends = std::make_shared<BackendProvider>(config.backend);
    try {
        backends->health_check();
    } catch (const BackendError& e) {
        fmt::print(stderr, "backend health check failed: {}\n", e.what());
        return kExitBackend;
    }
    ServiceOptions options = service_options(config);
    if (!static_dir.empty()) {
        options.static_dir = static_dir;
    }
    Service service(std::move(options), backends);
    const int bound = service.bind(host, port);
    fmt::print("listening on http://{}:{}\n", host, bound);
    std::fflush(stdout);
    g_stop = [&service] { service.stop(); };
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    service.listen();
    g_stop = nullptr;
    return 0;
}

int run_manifest(const fs::path& root, const fs::path& out) {
    const ManifestScan scan = scan_brats_dataset(root);
    for (const auto& w : scan.warnings) {
        fmt::print(stderr, "warning: {}\n", w);
    }
    if (scan.manifest.cases.empty()) {
        fmt::print(stderr, "no cases found under '{}'\n", root.string());
        return kExitBadInput;
    }
    write_manifest(out, scan.manifest);
    fmt::print("{} cases -> {}\n", scan.manifest.cases.size(), out.string());
    return 0;
}

BackendConfig backend_from_flags(const std::string& config_path, const std::string& kind, const std::string& url,
                                 double timeout_s) {
    BackendConfig backend;
    if (!config_path.empty()) {
        backend = load_config(config_path).backend;
    }
    if (!kind.empty()) {
        backend.kind = parse_backend_kind(kind);
    }
    if (!url.empty()) {
        backend.kind = BackendKind::External;
        backend.endpoint = url;
    } else if (const char* env = std::getenv("PROMPTSEG_BACKEND_URL"); env != nullptr && *env != '\0' &&
               config_path.empty() && kind.empty()) {
        backend.kind = BackendKind::External;
        backend.endpoint = env;
    }
    if (timeout_s > 0.0) {
        backend.timeout_s = timeout_s;
    }
    if (backend.kind == BackendKind::External && backend.endpoint.empty()) {
        throw ConfigError("an external backend needs --url or PROMPTSEG_BACKEND_URL");
    }
    return backend;
}

int run_backend_health(const BackendConfig& backend) {
    BackendProvider provider(backend);
    try {
        provider.health_check();
        fmt::print("ok {}\n", provider.backend_id());
    } catch (const BackendError& e) {
        fmt::print(stderr, "unhealthy: {}\n", e.what());
        return kExitBackend;
    }
    return 0;
}

int run_backend_serve(const std::string& host, int port, const std::vector<int>& tolerances) {
    ReferenceTolerances levels;
    if (!tolerances.empty()) {
        if (tolerances.size() != 3) {
            fmt::print(stderr, "--tolerances takes exactly 3 values\n");
            return kExitBadInput;
        }
        levels.levels = {tolerances[0], tolerances[1], tolerances[2]};
    }
    BackendServer server(std::make_shared<ReferenceSegmenter>(levels));
    const int bound = server.bind(host, port);
    fmt::print("reference backend on http://{}:{}\n", host, bound);
    std::fflush(stdout);
    g_stop = [&server] { server.stop(); };
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen();
    g_stop = nullptr;
    return 0;
}

int run_phantom(const fs::path& out, int count, int size, std::uint32_t seed) {
    std::vector<PhantomSpec> specs;
    for (int i = 0; i < count; ++i) {
        PhantomSpec spec;
        spec.case_id = fmt::format("phantom_{:03d}", i + 1);
        spec.grade = i % 2 == 0 ? Grade::HGG : Grade::LGG;
        spec.dims = {size, size, size};
        spec.radius = size / 4.0 - i % 3;
        spec.necrotic_fraction = i % 2 == 0 ? 0.4 : 0.0;
        spec.seed = seed + static_cast<std::uint32_t>(i);
        specs.push_back(spec);
    }
    fmt::print("{}\n", write_phantom_dataset(out, specs).string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evaluation workbench for promptable slice-wise tumor segmentation"};
    app.require_subcommand(1);
    int code = 0;

    auto* evaluate = app.add_subcommand("evaluate", "Run the simulated prompting grid over a dataset");
    std::string config_path;
    bool resume = false;
    evaluate->add_option("--config,-c", config_path, "Experiment config (JSON)")->required();
    evaluate->add_flag("--resume", resume, "Reuse checkpoints of an interrupted run");
    evaluate->callback([&] { code = run_evaluate(config_path, resume); });

    auto* fuse = app.add_subcommand("fuse", "Stack per-slice masks into volumes and score them in 3D");
    std::string records_path;
    std::string dataset;
    std::string fuse_manifest;
    std::string fuse_policy = "oracle";
    bool fuse_cropped = false;
    std::vector<int> fuse_labels;
    std::string fuse_out;
    std::string fuse_export;
    fuse->add_option("--records,-r", records_path, "records.jsonl")->required();
    fuse->add_option("--dataset,-d", dataset, "Dataset root")->required();
    fuse->add_option("--manifest", fuse_manifest, "Manifest (default: <dataset>/manifest.json)");
    fuse->add_option("--policy", fuse_policy, "Policy whose masks are stacked")->capture_default_str();
    fuse->add_flag("--cropped", fuse_cropped, "Stack the cropped-slice variant");
    fuse->add_option("--core-labels", fuse_labels, "Tumor core labels (default 1 4)");
    fuse->add_option("--output,-o", fuse_out, "Output directory (default: next to the records)");
    fuse->add_option("--export", fuse_export, "Write stacked and fused volumes as NIfTI here");
    fuse->callback([&] {
        code = run_fuse(records_path, dataset, fuse_manifest, fuse_policy, fuse_cropped, fuse_labels, fuse_out,
                        fuse_export);
    });

    auto* report = app.add_subcommand("report", "Aggregate record files into statistics tables");
    std::string report_records;
    std::string report_out;
    report->add_option("--records,-r", report_records, "records.jsonl")->required();
    report->add_option("--output,-o", report_out, "Output directory (default: <records dir>/report)");
    report->callback([&] { code = run_report(report_records, report_out); });

    auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
    std::string serve_config;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
    serve->add_option("--config,-c", serve_config, "Experiment config (JSON)")->required();
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port,-p", port)->capture_default_str();
    serve->add_option("--static", static_dir, "Directory served under /");
    serve->callback([&] { code = run_serve(serve_config, host, port, static_dir); });

    auto* manifest = app.add_subcommand("manifest", "Build a case manifest from a BraTS-style tree");
    std::string root;
    std::string manifest_out = "manifest.json";
    manifest->add_option("--dataset-root,-d", root, "Dataset root")->required();
    manifest->add_option("--output,-o", manifest_out)->capture_default_str();
    manifest->callback([&] { code = run_manifest(root, manifest_out); });

    auto* backends = app.add_subcommand("backends", "Backend utilities");
    backends->require_subcommand(1);
    auto* health = backends->add_subcommand("health", "Check that the configured backend answers");
    std::string health_config;
    std::string health_kind;
    std::string health_url;
    double health_timeout = 0.0;
    health->add_option("--config,-c", health_config, "Take the backend from an experiment config");
    health->add_option("--kind", health_kind, "reference | oracle_test | external");
    health->add_option("--url", health_url, "External backend endpoint");
    health->add_option("--timeout", health_timeout, "Seconds");
    health->callback([&] {
        try {
            code = run_backend_health(backend_from_flags(health_config, health_kind, health_url, health_timeout));
        } catch (const ConfigError& e) {
            fmt::print(stderr, "{}\n", e.what());
            code = kExitBadInput;
        }
    });
    auto* backend_serve = backends->add_subcommand("serve", "Serve the reference backend over the wire protocol");
    std::string backend_host = "127.0.0.1";
    int backend_port = 8701;
    std::vector<int> tolerances;
    backend_serve->add_option("--host", backend_host)->capture_default_str();
    backend_serve->add_option("--port,-p", backend_port)->capture_default_str();
    backend_serve->add_option("--tolerances", tolerances, "Three gray-level tolerances");
    backend_serve->callback([&] { code = run_backend_serve(backend_host, backend_port, tolerances); });

    auto* phantom = app.add_subcommand("phantom", "Write a synthetic dataset with a manifest");
    std::string phantom_out;
    int phantom_count = 2;
    int phantom_size = 64;
    std::uint32_t phantom_seed = 1;
    phantom->add_option("--output,-o", phantom_out, "Output directory")->required();
    phantom->add_option("--count,-n", phantom_count)->capture_default_str()->check(CLI::Range(1, 1000));
    phantom->add_option("--size", phantom_size, "Edge length in voxels")->capture_default_str()->check(CLI::Range(16, 512));
    phantom->add_option("--seed", phantom_seed)->capture_default_str();
    phantom->callback([&] { code = run_phantom(phantom_out, phantom_count, phantom_size, phantom_seed); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int exit = app.exit(e);
        return exit == 0 ? 0 : kExitBadInput;
    } catch (const ConfigError& e) {
        fmt::print(stderr, "{}\n", e.what());
        return kExitBadInput;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return code;
}
