#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "crs/bm25.hpp"
#include "crs/corpus.hpp"
#include "crs/textnorm.hpp"

namespace crs::users {

struct UserProfile {
    corpus::UserId user_id = 0;
    std::set<corpus::ItemId> liked;
    /// One document per item recommended to this user in training: the
    /// item title followed by this user's contexts for it.
    bm25::InvertedIndex index;
    std::size_t context_count = 0;
};

using Profiles = std::map<corpus::UserId, UserProfile>;

enum class Similarity : std::uint8_t {
    kJaccard,
    kOverlap,  // raw |A ∩ B|
};

struct FusionConfig {
    std::size_t num_users = 5;  // M
    double lambda = 0.05;
    Similarity similarity = Similarity::kJaccard;

    void validate() const;
};

struct ProfileOptions {
    bm25::Params params{};
    const Stopwords* stopwords = nullptr;
    /// Synthetic dialogues are kept out of user modeling unless set.
    bool include_synthetic = false;
};

Profiles build_profiles(std::span<const corpus::RecExample> train_examples,
                        std::span<const corpus::Dialogue> dialogues, const corpus::Catalog& catalog,
                        const ProfileOptions& options = {});

double similarity(const std::set<corpus::ItemId>& a, const std::set<corpus::ItemId>& b, Similarity metric);

/// Up to `count` users with non-zero similarity, best first, ties by ascending id.
std::vector<corpus::UserId> similar_users(const Profiles& profiles, const std::set<corpus::ItemId>& query_liked,
                                          std::size_t count, Similarity metric = Similarity::kJaccard);

/// global(doc) + lambda * sum over selected users of user_bm25(doc).
/// Degenerates to `global.search` when lambda == 0, M == 0 or nobody is selected.
bm25::RankedList fused_search(const bm25::InvertedIndex& global, const Profiles& profiles, const TokenStream& query,
                              const std::set<corpus::ItemId>& query_liked, const FusionConfig& config,
                              std::size_t k);

/// Binary profile file; see userselect.cpp for the layout.
void save_profiles(std::ostream& out, const Profiles& profiles);
Profiles load_profiles(std::istream& in);

}  // namespace crs::users
