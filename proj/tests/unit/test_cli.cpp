#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "crs/app/artifacts.hpp"
#include "crs/app/cli.hpp"
#include "test_paths.hpp"

namespace crs::app {
namespace {
namespace fs = std::filesystem;
using testing::data_path;
using testing::TempDir;

struct Run {
    int code;
    std::string out, err;
};

Run crs(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return read_file(p); }

Run build_tiny(const fs::path& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"build", "--train", data_path("tiny_train.jsonl").string(), "--metadata",
                                  data_path("tiny_metadata.jsonl").string(), "--out", out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return crs(args);
}

Run eval_tiny(const fs::path& index, const fs::path& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"eval", "--index", index.string(), "--test", data_path("tiny_test.jsonl").string(),
                                  "--out", out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return crs(args);
}

TEST(Cli, BuildWritesSnapshotAndReport) {
    TempDir tmp;
    const auto r = build_tiny(tmp / "idx");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("3 dialogues"), std::string::npos) << r.out;
    const auto snap = current_snapshot(tmp / "idx");
    for (const char* f : {"build_report.json", "timing.json", "index.bin", "profiles.bin", "catalog.jsonl",
                          "documents.jsonl", "train_examples.jsonl"})
        EXPECT_TRUE(fs::exists(snap / f)) << f;
    const auto report = nlohmann::json::parse(slurp(snap / "build_report.json"));
    EXPECT_EQ(report.at("items"), 5);
    EXPECT_EQ(report.at("dialogues"), 3);
    EXPECT_EQ(report.at("mode"), "full");
}

TEST(Cli, RepeatedBuildAndEvalAreByteIdentical) {
    TempDir tmp;
    for (const char* n : {"a", "b"}) {
        ASSERT_EQ(build_tiny(tmp / (std::string("idx-") + n)).code, 0);
        ASSERT_EQ(eval_tiny(tmp / (std::string("idx-") + n), tmp / (std::string("rep-") + n), {"--buckets"}).code, 0);
    }
    const auto sa = current_snapshot(tmp / "idx-a"), sb = current_snapshot(tmp / "idx-b");
    for (const auto& entry : fs::directory_iterator(sa)) {
        const auto name = entry.path().filename().string();
        if (name == "timing.json") continue;
        EXPECT_EQ(slurp(entry.path()), slurp(sb / name)) << name;
    }
    for (const char* f : {"report.jsonl", "summary.txt", "buckets.csv"})
        EXPECT_EQ(slurp(tmp / "rep-a" / f), slurp(tmp / "rep-b" / f)) << f;
}

TEST(Cli, NoMetadataModeNeedsNoMetadataFile) {
    TempDir tmp;
    const auto r = crs({"build", "--train", data_path("tiny_train.jsonl").string(), "--mode", "no_metadata", "--out",
                        (tmp / "idx").string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.err.find("no --metadata"), std::string::npos);
}

TEST(Cli, EvalWritesReportFiles) {
    TempDir tmp;
    ASSERT_EQ(build_tiny(tmp / "idx").code, 0);
    const auto r = eval_tiny(tmp / "idx", tmp / "rep");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto summary = slurp(tmp / "rep" / "summary.txt");
    EXPECT_NE(summary.find("examples: "), std::string::npos);
    EXPECT_NE(summary.find("R@50: "), std::string::npos);
    EXPECT_NE(summary.find("\"catalog_version\""), std::string::npos);
    std::istringstream lines(slurp(tmp / "rep" / "report.jsonl"));
    std::size_t n = 0;
    for (std::string line; std::getline(lines, line); ++n) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("gold"));
        EXPECT_TRUE(j.contains("rank"));
    }
    EXPECT_GT(n, 0u);
}

TEST(Cli, UserSelectWithZeroLambdaMatchesPlain) {
    TempDir tmp;
    ASSERT_EQ(build_tiny(tmp / "idx").code, 0);
    ASSERT_EQ(eval_tiny(tmp / "idx", tmp / "plain").code, 0);
    ASSERT_EQ(eval_tiny(tmp / "idx", tmp / "fused", {"--user-select", "--lambda", "0"}).code, 0);
    EXPECT_EQ(slurp(tmp / "plain" / "report.jsonl"), slurp(tmp / "fused" / "report.jsonl"));
}

TEST(Cli, SettingsComeFromFlagsEnvAndConfig) {
    TempDir tmp;
    std::ofstream(tmp / "cfg.json") << R"j({"k1": 1.2, "b": 0.5})j";
    ASSERT_EQ(build_tiny(tmp / "idx", {"--config", (tmp / "cfg.json").string(), "--b", "0.25"}).code, 0);
    const auto report = nlohmann::json::parse(slurp(current_snapshot(tmp / "idx") / "build_report.json"));
    EXPECT_DOUBLE_EQ(report["bm25"]["k1"].get<double>(), 1.2);
    EXPECT_DOUBLE_EQ(report["bm25"]["b"].get<double>(), 0.25);
    EXPECT_EQ(build_tiny(tmp / "bad", {"--b", "1.5"}).code, 1);
}

TEST(Cli, CatalogMismatchIsAnError) {
    TempDir tmp;
    ASSERT_EQ(build_tiny(tmp / "idx").code, 0);
    const auto r = eval_tiny(tmp / "idx", tmp / "rep", {"--expect-catalog", "0000000000000000"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("catalog version mismatch"), std::string::npos);
}

TEST(Cli, AddItemThenSearch) {
    TempDir tmp;
    ASSERT_EQ(build_tiny(tmp / "idx").code, 0);
    const auto before = current_snapshot(tmp / "idx");
    auto r = crs({"add-item", "--index", (tmp / "idx").string(), "--item", data_path("new_item.json").string(),
                  "--contexts", data_path("new_item_contexts.txt").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(current_snapshot(tmp / "idx"), before);

    r = crs({"search", "--index", (tmp / "idx").string(), "--query", "genetically inferior man", "--k", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("1\t106\t", 0), 0u) << r.out;
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);

    r = crs({"add-item", "--index", (tmp / "idx").string(), "--item", data_path("new_item.json").string()});
    EXPECT_EQ(r.code, 1);
}

TEST(Cli, BadInputsExitWithOne) {
    TempDir tmp;
    EXPECT_EQ(crs({}).code, 1);
    EXPECT_EQ(crs({"build", "--bogus"}).code, 1);
    EXPECT_EQ(crs({"build", "--train", (tmp / "missing.jsonl").string(), "--out", (tmp / "idx").string()}).code, 1);
    EXPECT_EQ(crs({"eval", "--index", (tmp / "nothing").string(), "--test", data_path("tiny_test.jsonl").string()}).code,
              1);
    EXPECT_EQ(build_tiny(tmp / "idx", {"--mode", "sideways"}).code, 1);
    ASSERT_EQ(build_tiny(tmp / "idx").code, 0);
    EXPECT_EQ(eval_tiny(tmp / "idx", tmp / "rep", {"--ks", "0"}).code, 1);
    EXPECT_EQ(eval_tiny(tmp / "idx", tmp / "rep", {"--sweep", "0,5"}).code, 1);  // no --synthetic
    EXPECT_EQ(crs({"search", "--index", (tmp / "idx").string(), "--query", "x", "--k", "0"}).code, 1);
}

TEST(Cli, AugmentReplayThenSweep) {
    TempDir tmp;
    auto r = crs({"augment", "--train", data_path("tiny_train.jsonl").string(), "--metadata",
                  data_path("tiny_metadata.jsonl").string(), "--out", (tmp / "synth.jsonl").string(), "--replay",
                  data_path("replay").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("2 kept, 1 discarded"), std::string::npos) << r.out;

    ASSERT_EQ(build_tiny(tmp / "idx").code, 0);
    r = eval_tiny(tmp / "idx", tmp / "rep", {"--sweep", "0,1,2", "--synthetic", (tmp / "synth.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream csv(slurp(tmp / "rep" / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "bucket_or_count,examples,r1,r10,r50");
    std::size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 3u);

    r = build_tiny(tmp / "aug", {"--augmented", (tmp / "synth.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = nlohmann::json::parse(slurp(current_snapshot(tmp / "aug") / "build_report.json"));
    EXPECT_EQ(report.at("synthetic_dialogues"), 2);
    EXPECT_EQ(report.at("synthetic_examples"), 2);
}

}  // namespace
}  // namespace crs::app
