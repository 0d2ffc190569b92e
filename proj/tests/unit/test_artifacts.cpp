#include <gtest/gtest.h>

#include <fstream>

#include "crs/app/artifacts.hpp"
#include "crs/errors.hpp"
#include "test_paths.hpp"

namespace crs::app {
namespace {
namespace fs = std::filesystem;

Engine tiny_engine() {
    auto train = corpus::parse_redial_file(testing::data_path("tiny_train.jsonl").string());
    auto md = corpus::parse_metadata_file(testing::data_path("tiny_metadata.jsonl").string());
    auto catalog = train.catalog;
    corpus::merge_catalog(catalog, md.items);
    Engine e;
    e.train_examples = corpus::extract_all(train.dialogues);
    e.items = docs::ItemIndex::build(catalog, md.metadata, e.train_examples, docs::Mode::kFull, {});
    e.profiles = std::make_shared<users::Profiles>(
        users::build_profiles(e.train_examples, train.dialogues, e.items.catalog()));
    return e;
}

TEST(Artifacts, CatalogVersionDependsOnIdsAndTitles) {
    corpus::Catalog a{{"1", {"1", "A"}}, {"2", {"2", "B"}}};
    auto b = a;
    EXPECT_EQ(catalog_version(a), catalog_version(b));
    b["2"].title = "C";
    EXPECT_NE(catalog_version(a), catalog_version(b));
    EXPECT_EQ(hex64(0xabc), "0000000000000abc");
}

TEST(Artifacts, SnapshotRoundTrip) {
    testing::TempDir dir;
    auto engine = tiny_engine();
    write_snapshot(dir.path(), engine, 1.5);
    const auto loaded = load_engine(dir.path());
    EXPECT_TRUE(loaded.items.index() == engine.items.index());
    EXPECT_EQ(loaded.items.catalog(), engine.items.catalog());
    EXPECT_EQ(loaded.items.metadata(), engine.items.metadata());
    EXPECT_EQ(loaded.train_examples, engine.train_examples);
    EXPECT_EQ(loaded.items.mode(), docs::Mode::kFull);
    EXPECT_EQ(loaded.profiles->size(), engine.profiles->size());
    ASSERT_EQ(loaded.items.documents().size(), engine.items.documents().size());
    EXPECT_EQ(loaded.report.at("items"), 5);
    EXPECT_EQ(loaded.report.at("catalog_version"), hex64(catalog_version(engine.items.catalog())));
}

TEST(Artifacts, RewritingGivesIdenticalBytesExceptTiming) {
    testing::TempDir a, b;
    auto e1 = tiny_engine();
    auto e2 = tiny_engine();
    const auto s1 = write_snapshot(a.path(), e1, 1.0);
    const auto s2 = write_snapshot(b.path(), e2, 2.0);
    for (const char* f : {"index.bin", "profiles.bin", "catalog.jsonl", "documents.jsonl", "train_examples.jsonl",
                          "build_report.json"})
        EXPECT_EQ(read_file(s1 / f), read_file(s2 / f)) << f;
    EXPECT_NE(read_file(s1 / "timing.json"), read_file(s2 / "timing.json"));
}

TEST(Artifacts, SnapshotSwapKeepsOnlyCurrentAndPrevious) {
    testing::TempDir dir;
    auto engine = tiny_engine();
    const auto s1 = write_snapshot(dir.path(), engine, 0);
    engine.items.register_new_item(corpus::Item{"106", "Gattaca (1997)"}, nullptr);
    const auto s2 = write_snapshot(dir.path(), engine, 0);
    EXPECT_EQ(current_snapshot(dir.path()), s2);
    EXPECT_TRUE(fs::exists(s1));
    const auto s3 = write_snapshot(dir.path(), engine, 0);
    EXPECT_FALSE(fs::exists(s1));
    EXPECT_TRUE(fs::exists(s2));
    EXPECT_EQ(load_engine(dir.path()).items.catalog().size(), 6u);
    EXPECT_EQ(current_snapshot(dir.path()), s3);
}

TEST(Artifacts, MismatchedCatalogIsRejected) {
    testing::TempDir dir;
    auto engine = tiny_engine();
    const auto snap = write_snapshot(dir.path(), engine, 0);
    auto text = read_file(snap / "catalog.jsonl");
    const auto pos = text.find("Alien (1979)");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 12, "Aliens (1986)");
    write_file_atomic(snap / "catalog.jsonl", text);
    EXPECT_THROW(load_engine(dir.path()), InputError);
}

TEST(Artifacts, MissingOrCorruptDirectory) {
    testing::TempDir dir;
    EXPECT_THROW(load_engine(dir.path()), InputError);
    std::ofstream(dir / "CURRENT") << "garbage\n";
    EXPECT_THROW(load_engine(dir.path()), InputError);
    fs::remove(dir / "CURRENT");
    auto engine = tiny_engine();
    const auto snap = write_snapshot(dir.path(), engine, 0);
    fs::remove(snap / "index.bin");
    EXPECT_THROW(load_engine(dir.path()), InputError);
}

TEST(Artifacts, PolicyNames) {
    EXPECT_EQ(parse_policy("first"), corpus::RecPolicy::kFirstMentionOnly);
    EXPECT_EQ(parse_policy(to_string(corpus::RecPolicy::kAllAgentMentions)), corpus::RecPolicy::kAllAgentMentions);
    EXPECT_THROW(parse_policy("some"), InputError);
}

}  // namespace
}  // namespace crs::app
