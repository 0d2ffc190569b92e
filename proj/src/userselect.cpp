#include "crs/userselect.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "binio.hpp"
#include "crs/errors.hpp"

namespace crs::users {

void FusionConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("fusion: lambda must be >= 0");
}

Profiles build_profiles(std::span<const corpus::RecExample> train_examples,
                        std::span<const corpus::Dialogue> dialogues, const corpus::Catalog& catalog,
                        const ProfileOptions& options) {
    Profiles profiles;
    for (const auto& d : dialogues) {
        if (d.synthetic && !options.include_synthetic) continue;
        auto& p = profiles[d.seeker_id];
        p.user_id = d.seeker_id;
        auto liked = corpus::liked_items(d, corpus::Role::kSeeker);
        p.liked.insert(liked.begin(), liked.end());
    }

    // user -> item -> contexts, in training order
    std::map<corpus::UserId, std::map<corpus::ItemId, std::vector<const std::string*>>> grouped;
    for (const auto& ex : train_examples) {
        if (ex.synthetic && !options.include_synthetic) continue;
        if (!catalog.contains(ex.gold_item_id)) continue;
        grouped[ex.user_id][ex.gold_item_id].push_back(&ex.query_text);
    }

    for (auto& [user, items] : grouped) {
        auto& p = profiles[user];
        p.user_id = user;
        std::vector<std::pair<std::string, TokenStream>> docs;
        docs.reserve(items.size());
        for (const auto& [item, contexts] : items) {
            TokenStream tokens = tokenize(catalog.at(item).title, options.stopwords);
            for (const auto* ctx : contexts) tokenize_into(*ctx, tokens, options.stopwords);
            p.context_count += contexts.size();
            docs.emplace_back(item, std::move(tokens));
        }
        p.index = bm25::InvertedIndex::build(docs, options.params);
    }
    for (auto& [user, p] : profiles) {
        if (!grouped.contains(user)) p.index = bm25::InvertedIndex(options.params);
    }
    return profiles;
}

double similarity(const std::set<corpus::ItemId>& a, const std::set<corpus::ItemId>& b, Similarity metric) {
    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    if (metric == Similarity::kOverlap) return static_cast<double>(common);
    const std::size_t uni = a.size() + b.size() - common;
    return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

std::vector<corpus::UserId> similar_users(const Profiles& profiles, const std::set<corpus::ItemId>& query_liked,
                                          std::size_t count, Similarity metric) {
    std::vector<std::pair<double, corpus::UserId>> scored;
    if (count == 0 || query_liked.empty()) return {};
    for (const auto& [id, p] : profiles) {
        const double s = similarity(query_liked, p.liked, metric);
        if (s > 0.0) scored.emplace_back(s, id);
    }
    auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
    const std::size_t take = std::min(count, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
    std::vector<corpus::UserId> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
    return out;
}

bm25::RankedList fused_search(const bm25::InvertedIndex& global, const Profiles& profiles, const TokenStream& query,
                              const std::set<corpus::ItemId>& query_liked, const FusionConfig& config,
                              std::size_t k) {
    if (config.lambda == 0.0 || config.num_users == 0 || query_liked.empty()) return global.search(query, k);
    const auto selected = similar_users(profiles, query_liked, config.num_users, config.similarity);
    if (selected.empty()) return global.search(query, k);
    if (k == 0) throw std::invalid_argument("fused_search requires k >= 1");
    if (global.doc_count() == 0) return {};

    using DocId = bm25::InvertedIndex::DocId;
    std::vector<double> scores(global.doc_count(), 0.0);
    std::vector<DocId> touched;
    global.accumulate(query, scores, touched);

    std::vector<double> user_sum(global.doc_count(), 0.0);
    std::vector<DocId> user_touched;
    std::vector<double> local;
    std::vector<DocId> local_touched;
    for (auto user : selected) {
        const auto& idx = profiles.at(user).index;
        if (idx.doc_count() == 0) continue;
        local.assign(idx.doc_count(), 0.0);
        local_touched.clear();
        idx.accumulate(query, local, local_touched);
        for (DocId d : local_touched) {
            auto g = global.find_doc(idx.doc_ref(d));
            if (!g || local[d] == 0.0) continue;
            if (user_sum[*g] == 0.0) user_touched.push_back(*g);
            user_sum[*g] += local[d];
            local[d] = 0.0;
        }
    }
    for (DocId g : user_touched) scores[g] = scores[g] + config.lambda * user_sum[g];
    touched.insert(touched.end(), user_touched.begin(), user_touched.end());
    return global.rank(scores, touched, k);
}

// Profile file, little-endian:
//   magic "CRSUSR1\0", u32 profile_count, then per profile (ascending user id):
//   i64 user_id, u64 context_count, u32 n, n x str liked_item, u64 blob_len, blob
//   (blob = InvertedIndex::save output), and a trailing u64 FNV-1a checksum.
namespace {
constexpr std::string_view kProfileMagic{"CRSUSR1\0", 8};
}

void save_profiles(std::ostream& out, const Profiles& profiles) {
    binio::Writer w;
    w.raw(kProfileMagic);
    w.u32(static_cast<std::uint32_t>(profiles.size()));
    for (const auto& [id, p] : profiles) {
        w.i64(id);
        w.u64(p.context_count);
        w.u32(static_cast<std::uint32_t>(p.liked.size()));
        for (const auto& item : p.liked) w.str(item);
        std::ostringstream blob;
        p.index.save(blob);
        const auto bytes = blob.str();
        w.u64(bytes.size());
        w.raw(bytes);
    }
    w.u64(binio::fnv1a(w.bytes()));
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw std::runtime_error("failed writing user profiles");
}

Profiles load_profiles(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();
    if (data.size() < kProfileMagic.size() + 8 || std::string_view(data).substr(0, 8) != kProfileMagic)
        throw InputError("not a user profile file (bad magic)");
    const std::string_view payload(data.data(), data.size() - 8);
    binio::Reader tail(std::string_view(data).substr(data.size() - 8));
    if (tail.u64() != binio::fnv1a(payload)) throw InputError("user profile file checksum mismatch");

    binio::Reader r(payload);
    r.take(kProfileMagic.size());
    Profiles out;
    const auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        UserProfile p;
        p.user_id = r.i64();
        p.context_count = r.u64();
        const auto liked = r.u32();
        for (std::uint32_t j = 0; j < liked; ++j) p.liked.insert(r.str());
        const auto len = r.u64();
        std::istringstream blob(std::string(r.take(len)));
        p.index = bm25::InvertedIndex::load(blob);
        if (!out.emplace(p.user_id, std::move(p)).second) throw InputError("user profile file: duplicate user");
    }
    if (!r.done()) throw InputError("user profile file: trailing bytes");
    return out;
}

}  // namespace crs::users
