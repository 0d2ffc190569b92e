#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "bm25_oracle.hpp"
#include "crs/corpus.hpp"
#include "crs/errors.hpp"
#include "crs/userselect.hpp"
#include "redial_synth.hpp"
#include "test_paths.hpp"

namespace crs::users {
namespace {

Profiles liked_only(const std::map<corpus::UserId, std::set<corpus::ItemId>>& liked) {
    Profiles out;
    for (const auto& [id, items] : liked) {
        out[id].user_id = id;
        out[id].liked = items;
    }
    return out;
}

TEST(Similarity, JaccardAndOverlap) {
    EXPECT_DOUBLE_EQ(similarity({"a", "b"}, {"a", "b"}, Similarity::kJaccard), 1.0);
    EXPECT_DOUBLE_EQ(similarity({"a", "b"}, {"a"}, Similarity::kJaccard), 0.5);
    EXPECT_DOUBLE_EQ(similarity({"a", "b"}, {"b", "c", "d"}, Similarity::kJaccard), 0.25);
    EXPECT_DOUBLE_EQ(similarity({}, {}, Similarity::kJaccard), 0.0);
    EXPECT_DOUBLE_EQ(similarity({"a", "b"}, {"b", "c", "d"}, Similarity::kOverlap), 1.0);
}

TEST(SimilarUsers, RanksByJaccard) {
    const auto profiles = liked_only({{1, {"a", "b"}}, {2, {"a"}}, {3, {"c"}}});
    // Brute force over all users: J = 1, 1/2, 0.
    EXPECT_EQ(similar_users(profiles, {"a", "b"}, 2), (std::vector<corpus::UserId>{1, 2}));
    EXPECT_DOUBLE_EQ(similarity({"a", "b"}, profiles.at(2).liked, Similarity::kJaccard), 0.5);
}

TEST(SimilarUsers, EmptyLikedSelectsNobody) {
    const auto profiles = liked_only({{1, {"a"}}});
    EXPECT_TRUE(similar_users(profiles, {}, 5).empty());
}

TEST(SimilarUsers, ZeroMSelectsNobody) {
    const auto profiles = liked_only({{1, {"a"}}});
    EXPECT_TRUE(similar_users(profiles, {"a"}, 0).empty());
}

TEST(SimilarUsers, LargeMReturnsAllNonZeroRanked) {
    const auto profiles = liked_only({{4, {"a"}}, {2, {"a"}}, {9, {"a", "b"}}, {1, {"x"}}});
    EXPECT_EQ(similar_users(profiles, {"a", "b"}, 10), (std::vector<corpus::UserId>{9, 2, 4}));
}

TEST(SimilarUsers, OverlapMetricIgnoresSetSizes) {
    const auto profiles = liked_only({{1, {"a", "x", "y", "z"}}, {2, {"a", "b"}}, {3, {"a"}}});
    EXPECT_EQ(similar_users(profiles, {"a", "b"}, 3, Similarity::kOverlap), (std::vector<corpus::UserId>{2, 1, 3}));
    EXPECT_EQ(similar_users(profiles, {"a", "b"}, 3, Similarity::kJaccard), (std::vector<corpus::UserId>{2, 3, 1}));
}

struct Tiny {
    corpus::ParseResult train;
    std::vector<corpus::RecExample> examples;
};

Tiny tiny() {
    Tiny t;
    t.train = corpus::parse_redial_file(testing::data_path("tiny_train.jsonl").string());
    t.examples = corpus::extract_all(t.train.dialogues);
    return t;
}

TEST(Profiles, TinyFixture) {
    const auto t = tiny();
    const auto profiles = build_profiles(t.examples, t.train.dialogues, t.train.catalog);
    ASSERT_EQ(profiles.size(), 2u);  // seekers 1 and 3
    const auto& u1 = profiles.at(1);
    EXPECT_EQ(u1.liked, (std::set<corpus::ItemId>{"101", "103"}));
    EXPECT_EQ(u1.index.doc_count(), 2u);  // 103 once, 104 twice
    EXPECT_EQ(u1.context_count, 3u);
    EXPECT_TRUE(u1.index.contains("104"));
    EXPECT_EQ(profiles.at(3).liked, (std::set<corpus::ItemId>{"101", "102"}));
    EXPECT_EQ(profiles.at(3).context_count, 2u);
}

TEST(Profiles, PerUserDocumentIsTitlePlusContexts) {
    const auto t = tiny();
    const auto profiles = build_profiles(t.examples, t.train.dialogues, t.train.catalog);
    TokenStream expected = tokenize("Heat (1995)");
    for (const auto& ex : t.examples)
        if (ex.user_id == 1 && ex.gold_item_id == "104") tokenize_into(ex.query_text, expected);
    const auto& idx = profiles.at(1).index;
    EXPECT_EQ(idx.doc_length(*idx.find_doc("104")), expected.size());
}

TEST(Profiles, SingleRecommendationGivesOneDocument) {
    auto t = tiny();
    std::vector<corpus::Dialogue> one{t.train.dialogues[2]};
    const auto profiles = build_profiles(corpus::extract_all(one), one, t.train.catalog);
    EXPECT_EQ(profiles.at(1).index.doc_count(), 1u);
    // No questionnaire in this dialogue and no seeker mentions.
    EXPECT_TRUE(profiles.at(1).liked.empty());
}

TEST(Profiles, ContextCountsSumToExampleCount) {
    const auto synth = testing::synth_redial(21, 400);
    std::istringstream in(testing::to_jsonl(synth.dialogues));
    const auto parsed = corpus::parse_redial(in);
    const auto examples = corpus::extract_all(parsed.dialogues);
    const auto profiles = build_profiles(examples, parsed.dialogues, parsed.catalog);
    std::size_t total = 0;
    for (const auto& [id, p] : profiles) total += p.context_count;
    EXPECT_EQ(total, examples.size());
}

TEST(Profiles, SyntheticDialoguesStayOutUnlessAsked) {
    auto t = tiny();
    auto synth = t.train.dialogues[0];
    synth.synthetic = true;
    synth.seeker_id = corpus::kSyntheticUser;
    synth.dialogue_id = "synthetic-x";
    std::vector<corpus::Dialogue> dialogues = t.train.dialogues;
    dialogues.push_back(synth);
    auto examples = corpus::extract_all(dialogues);
    EXPECT_FALSE(build_profiles(examples, dialogues, t.train.catalog).contains(corpus::kSyntheticUser));
    ProfileOptions opts;
    opts.include_synthetic = true;
    EXPECT_TRUE(build_profiles(examples, dialogues, t.train.catalog, opts).contains(corpus::kSyntheticUser));
}

// Three users, four items, per-user documents written out by hand.
class FusionTable : public ::testing::Test {
protected:
    void SetUp() override {
        global_docs = {{"i1", {"space", "alien", "ship"}},
                       {"i2", {"funny", "dog", "family"}},
                       {"i3", {"space", "funny", "robot", "robot"}},
                       {"i4", {"war", "drama"}}};
        std::vector<std::pair<std::string, TokenStream>> g;
        for (const auto& d : global_docs) g.emplace_back(d.ref, d.tokens);
        global = bm25::InvertedIndex::build(g);

        user_docs[1] = {{"i1", {"space", "scary", "alien"}}, {"i3", {"robot", "space", "funny"}}};
        user_docs[2] = {{"i3", {"robot", "robot", "kids"}}};
        user_docs[3] = {{"i2", {"dog", "funny"}}, {"i4", {"war"}}};
        const std::map<corpus::UserId, std::set<corpus::ItemId>> liked{{1, {"i1", "i3"}}, {2, {"i3"}}, {3, {"i2"}}};
        for (const auto& [u, docs] : user_docs) {
            std::vector<std::pair<std::string, TokenStream>> d;
            for (const auto& x : docs) d.emplace_back(x.ref, x.tokens);
            profiles[u].user_id = u;
            profiles[u].liked = liked.at(u);
            profiles[u].index = bm25::InvertedIndex::build(d);
        }
    }

    double expected(const TokenStream& q, const std::string& ref, const std::vector<corpus::UserId>& users,
                    double lambda) const {
        const testing::Bm25Oracle g(global_docs, 1.6, 0.7);
        double s = 0;
        for (const auto& d : global_docs)
            if (d.ref == ref) s = g.score(q, d);
        for (auto u : users) {
            const testing::Bm25Oracle o(user_docs.at(u), 1.6, 0.7);
            for (const auto& d : user_docs.at(u))
                if (d.ref == ref) s += lambda * o.score(q, d);
        }
        return s;
    }

    std::vector<testing::OracleDoc> global_docs;
    std::map<corpus::UserId, std::vector<testing::OracleDoc>> user_docs;
    bm25::InvertedIndex global;
    Profiles profiles;
};

TEST_F(FusionTable, ScoresEqualGlobalPlusWeightedUserScores) {
    const TokenStream q{"space", "robot", "funny"};
    const FusionConfig cfg{5, 0.05, Similarity::kJaccard};
    // liked {i3}: J(user1) = 1/2, J(user2) = 1, J(user3) = 0
    const auto ranked = fused_search(global, profiles, q, {"i3"}, cfg, 4);
    ASSERT_EQ(ranked.size(), 4u);
    for (const auto& r : ranked) EXPECT_NEAR(r.score, expected(q, r.doc_ref, {1, 2}, 0.05), 1e-12) << r.doc_ref;
    EXPECT_EQ(ranked[0].doc_ref, "i3");
}

TEST_F(FusionTable, MLimitsContributingUsers) {
    const TokenStream q{"space", "robot"};
    const FusionConfig cfg{1, 0.05, Similarity::kJaccard};
    const auto ranked = fused_search(global, profiles, q, {"i3"}, cfg, 4);
    for (const auto& r : ranked) EXPECT_NEAR(r.score, expected(q, r.doc_ref, {2}, 0.05), 1e-12);
}

TEST_F(FusionTable, DegenerateConfigsEqualPlainSearch) {
    const TokenStream q{"space", "funny", "dog"};
    const auto plain = global.search(q, 4);
    EXPECT_EQ(fused_search(global, profiles, q, {"i3"}, FusionConfig{5, 0.0}, 4), plain);
    EXPECT_EQ(fused_search(global, profiles, q, {"i3"}, FusionConfig{0, 0.05}, 4), plain);
    EXPECT_EQ(fused_search(global, profiles, q, {}, FusionConfig{5, 0.05}, 4), plain);
    EXPECT_EQ(fused_search(global, profiles, q, {"nobody-likes-this"}, FusionConfig{5, 0.05}, 4), plain);
}

TEST_F(FusionTable, FusedScoresNeverBelowGlobal) {
    std::mt19937_64 rng(3);
    const std::vector<std::string> vocab{"space", "alien", "ship", "funny", "dog", "family", "robot", "war",
                                         "drama", "kids", "scary"};
    for (int i = 0; i < 200; ++i) {
        TokenStream q;
        for (std::size_t j = 0, n = rng() % 5; j < n; ++j) q.push_back(vocab[rng() % vocab.size()]);
        std::set<corpus::ItemId> liked;
        for (const char* id : {"i1", "i2", "i3", "i4"})
            if (rng() % 2) liked.insert(id);
        const auto fused = fused_search(global, profiles, q, liked, FusionConfig{static_cast<std::size_t>(rng() % 4), 0.3}, 4);
        for (const auto& r : fused) EXPECT_GE(r.score, global.score(q, r.doc_ref));
    }
}

TEST(ProfilesIo, RoundTrip) {
    const auto t = tiny();
    const auto profiles = build_profiles(t.examples, t.train.dialogues, t.train.catalog);
    std::stringstream buf;
    save_profiles(buf, profiles);
    const auto loaded = load_profiles(buf);
    ASSERT_EQ(loaded.size(), profiles.size());
    for (const auto& [id, p] : profiles) {
        const auto& q = loaded.at(id);
        EXPECT_EQ(q.liked, p.liked);
        EXPECT_EQ(q.context_count, p.context_count);
        EXPECT_TRUE(q.index == p.index);
    }
}

TEST(ProfilesIo, CorruptionIsDetected) {
    const auto t = tiny();
    std::stringstream buf;
    save_profiles(buf, build_profiles(t.examples, t.train.dialogues, t.train.catalog));
    std::string bytes = buf.str();
    bytes[bytes.size() / 2] ^= 1;
    std::istringstream in(bytes);
    EXPECT_THROW(load_profiles(in), InputError);
    std::istringstream empty("");
    EXPECT_THROW(load_profiles(empty), InputError);
}

}  // namespace
}  // namespace crs::users
