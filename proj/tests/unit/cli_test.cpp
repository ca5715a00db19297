// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "fixtures.hpp"

extern char** environ;

namespace promptseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kCli = PROMPTSEG_CLI_PATH;

std::string quote(const std::string& s) { return "'" + s + "'"; }

// Runs the CLI through the shell with stdout and stderr captured in `dir`.
int run(const testing::TempDir& dir, const std::string& args) {
    const std::string cmd = quote(kCli) + " " + args + " >" + quote((dir / "stdout.txt").string()) + " 2>" +
                            quote((dir / "stderr.txt").string());
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        ::unsetenv("PROMPTSEG_DATA");
        ::unsetenv("PROMPTSEG_BACKEND_URL");
    }
    testing::TempDir dir_;
};

TEST_F(CliTest, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run(dir_, "evaluate"), 2);
    EXPECT_EQ(run(dir_, "no-such-command"), 2);
    EXPECT_EQ(run(dir_, "--help"), 0);
}

TEST_F(CliTest, InvalidConfigExitsWithTwo) {
    const auto config = testing::write_experiment(dir_.path(), {{"max_points", 12}}, testing::small_phantoms(1, 16));
    EXPECT_EQ(run(dir_, "evaluate -c " + quote(config.string())), 2);
    EXPECT_NE(testing::read_file(dir_ / "stderr.txt").find("max_points"), std::string::npos);
    EXPECT_EQ(run(dir_, "evaluate -c " + quote((dir_ / "missing.json").string())), 2);
}

TEST_F(CliTest, UnreachableBackendExitsWithThree) {
    const auto config = testing::write_experiment(
        dir_.path(), {{"backend", {{"kind", "external"}, {"endpoint", "http://127.0.0.1:1"}, {"timeout_s", 2}}}},
        testing::small_phantoms(1, 16));
    EXPECT_EQ(run(dir_, "evaluate -c " + quote(config.string())), 3);
    EXPECT_EQ(run(dir_, "backends health --kind external --url http://127.0.0.1:1 --timeout 2"), 3);
    EXPECT_EQ(run(dir_, "backends health --kind reference"), 0);
}

TEST_F(CliTest, EvaluateReportAndFuse) {
    const auto config = testing::write_experiment(
        dir_.path(), {{"orientations", {"transversal"}}, {"parallelism", 2}}, testing::small_phantoms(2, 24));
    ASSERT_EQ(run(dir_, "evaluate -c " + quote(config.string())), 0) << testing::read_file(dir_ / "stderr.txt");
    const auto records = dir_ / "out/records.jsonl";
    ASSERT_TRUE(fs::exists(records));
    for (const char* name : {"records.csv", "failures.json", "run_manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir_ / "out" / name)) << name;
    }

    ASSERT_EQ(run(dir_, "report -r " + quote(records.string())), 0) << testing::read_file(dir_ / "stderr.txt");
    EXPECT_TRUE(fs::exists(dir_ / "out/report/report.json"));
    EXPECT_TRUE(fs::exists(dir_ / "out/report/curves.csv"));

    ASSERT_EQ(run(dir_, "fuse -r " + quote(records.string()) + " -d " + quote((dir_ / "data").string()) +
                            " --export " + quote((dir_ / "volumes").string())),
              0)
        << testing::read_file(dir_ / "stderr.txt");
    const auto fusion = json::parse(testing::read_file(dir_ / "out/fusion.json"));
    ASSERT_EQ(fusion.at("cases").size(), 2u);
    for (const auto& c : fusion.at("cases")) {
        EXPECT_TRUE(c.contains("dice_axial"));
        EXPECT_FALSE(c.contains("dice_majority"));
    }
    const auto md = testing::read_file(dir_ / "out/fusion.md");
    EXPECT_EQ(md.find("| Majority"), std::string::npos);
    EXPECT_NE(md.find("majority vote omitted"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir_ / "volumes/case_1_transversal.nii.gz"));
}

TEST_F(CliTest, ReportOnEmptyInputExitsWithTwo) {
    std::ofstream(dir_ / "empty.jsonl").close();
    EXPECT_EQ(run(dir_, "report -r " + quote((dir_ / "empty.jsonl").string())), 2);
    EXPECT_EQ(run(dir_, "report -r " + quote((dir_ / "absent.jsonl").string())), 2);
}

TEST_F(CliTest, ParallelismDoesNotChangeRecords) {
    const auto specs = testing::small_phantoms(3, 20);
    const auto serial = testing::write_experiment(dir_ / "a", {{"parallelism", 1}}, specs);
    const auto parallel = testing::write_experiment(dir_ / "b", {{"parallelism", 8}}, specs);
    ASSERT_EQ(run(dir_, "evaluate -c " + quote(serial.string())), 0);
    ASSERT_EQ(run(dir_, "evaluate -c " + quote(parallel.string())), 0);
    EXPECT_EQ(testing::read_file(dir_ / "a/out/records.jsonl"), testing::read_file(dir_ / "b/out/records.jsonl"));
    EXPECT_EQ(testing::read_file(dir_ / "a/out/records.csv"), testing::read_file(dir_ / "b/out/records.csv"));
}

bool has_case_checkpoint(const fs::path& dir) {
    if (!fs::exists(dir)) {
        return false;
    }
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".jsonl") {
            return true;
        }
    }
    return false;
}

TEST_F(CliTest, KilledRunResumesToIdenticalOutput) {
    const auto specs = testing::small_phantoms(4, 32);
    const json overrides = {{"orientations", {"transversal", "coronal", "sagittal"}},
                            {"policies", {"oracle", "suggested"}}};
    const auto reference = testing::write_experiment(dir_ / "ref", overrides, specs);
    ASSERT_EQ(run(dir_, "evaluate -c " + quote(reference.string())), 0);

    const auto config = testing::write_experiment(dir_ / "killed", overrides, specs);
    std::vector<std::string> args{kCli, "evaluate", "-c", config.string()};
    std::vector<char*> argv;
    for (auto& a : args) {
        argv.push_back(a.data());
    }
    argv.push_back(nullptr);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 2, "/dev/null", O_WRONLY, 0);
    pid_t pid = 0;
    ASSERT_EQ(posix_spawn(&pid, kCli.c_str(), &actions, nullptr, argv.data(), environ), 0);
    posix_spawn_file_actions_destroy(&actions);
    const auto checkpoints = dir_ / "killed/out/checkpoints";
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(120);
    while (!has_case_checkpoint(checkpoints) && std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
    ASSERT_TRUE(has_case_checkpoint(checkpoints));

    ASSERT_EQ(run(dir_, "evaluate --resume -c " + quote(config.string())), 0);
    EXPECT_NE(testing::read_file(dir_ / "stdout.txt").find("resumed"), std::string::npos);
    EXPECT_EQ(testing::read_file(dir_ / "killed/out/records.jsonl"), testing::read_file(dir_ / "ref/out/records.jsonl"));
    EXPECT_EQ(testing::read_file(dir_ / "killed/out/records.csv"), testing::read_file(dir_ / "ref/out/records.csv"));
}

TEST_F(CliTest, PhantomAndManifestCommands) {
    ASSERT_EQ(run(dir_, "phantom -o " + quote((dir_ / "ph").string()) + " -n 2 --size 16"), 0);
    const auto manifest = json::parse(testing::read_file(dir_ / "ph/manifest.json"));
    ASSERT_EQ(manifest.at("cases").size(), 2u);
    EXPECT_EQ(manifest.at("cases")[0].at("id"), "phantom_001");

    const auto tree = dir_ / "tree/HGG/c1";
    fs::create_directories(tree);
    std::ofstream(tree / "c1_t1ce.nii.gz") << "x";
    std::ofstream(tree / "c1_seg.nii.gz") << "x";
    ASSERT_EQ(run(dir_, "manifest -d " + quote((dir_ / "tree").string()) + " -o " +
                            quote((dir_ / "tree/manifest.json").string())),
              0);
    const auto scanned = json::parse(testing::read_file(dir_ / "tree/manifest.json"));
    EXPECT_EQ(scanned.at("cases")[0].at("grade"), "HGG");
}

}  // namespace
}  // namespace promptseg
