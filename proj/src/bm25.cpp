#include "crs/bm25.hpp"

#include <limits>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crs/errors.hpp"

namespace crs::bm25 {

void Params::validate() const {
    if (!(k1 >= 0.0) || !std::isfinite(k1)) throw std::invalid_argument("bm25: k1 must be a finite non-negative number");
    if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("bm25: b must lie in [0, 1]");
}

double idf_value(IdfVariant variant, std::size_t doc_count, std::size_t doc_freq) {
    if (doc_count == 0) return 0.0;
    const double n = static_cast<double>(doc_count);
    const double df = static_cast<double>(doc_freq);
    const double ratio = (n - df + 0.5) / (df + 0.5);
    switch (variant) {
        case IdfVariant::kRobertson:
            return std::log(ratio);
        case IdfVariant::kNonNegative:
        default:
            return std::log1p(ratio);
    }
}

InvertedIndex::InvertedIndex(Params params) : params_(params) { params_.validate(); }

InvertedIndex InvertedIndex::build(std::span<const std::pair<std::string, TokenStream>> docs, Params params) {
    InvertedIndex index(params);
    index.doc_refs_.reserve(docs.size());
    for (const auto& [ref, tokens] : docs) index.insert_document(ref, tokens);

    index.docs_by_ref_.resize(index.doc_refs_.size());
    for (DocId i = 0; i < index.docs_by_ref_.size(); ++i) index.docs_by_ref_[i] = i;
    std::sort(index.docs_by_ref_.begin(), index.docs_by_ref_.end(),
              [&](DocId a, DocId b) { return index.doc_refs_[a] < index.doc_refs_[b]; });
    index.refresh_norms();
    return index;
}

void InvertedIndex::add_document(std::string doc_ref, const TokenStream& tokens) {
    insert_document(std::move(doc_ref), tokens);
    const DocId id = static_cast<DocId>(doc_refs_.size() - 1);
    auto pos = std::lower_bound(docs_by_ref_.begin(), docs_by_ref_.end(), doc_refs_[id],
                                [&](DocId d, const std::string& ref) { return doc_refs_[d] < ref; });
    docs_by_ref_.insert(pos, id);
    refresh_norms();
}

void InvertedIndex::insert_document(std::string doc_ref, const TokenStream& tokens) {
    if (doc_lookup_.contains(doc_ref)) throw InputError("duplicate document: " + doc_ref);
    if (doc_refs_.size() >= std::numeric_limits<DocId>::max()) throw std::length_error("bm25: too many documents");
    const DocId id = static_cast<DocId>(doc_refs_.size());

    // Count per-document term frequencies; first-occurrence order keeps postings appends deterministic.
    std::unordered_map<std::string_view, std::uint32_t> counts;
    std::vector<std::string_view> order;
    for (const auto& tok : tokens) {
        auto [it, inserted] = counts.try_emplace(tok, 0);
        if (inserted) order.push_back(tok);
        ++it->second;
    }
    for (auto term : order) {
        auto [it, inserted] = term_lookup_.try_emplace(std::string(term), static_cast<TermId>(terms_.size()));
        if (inserted) {
            terms_.emplace_back(term);
            postings_.emplace_back();
        }
        postings_[it->second].push_back(Posting{id, counts[term]});
    }

    doc_lookup_.emplace(doc_ref, id);
    doc_refs_.push_back(std::move(doc_ref));
    doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total_length_ += tokens.size();
}

double InvertedIndex::avg_doc_length() const {
    if (doc_refs_.empty()) return 0.0;
    return static_cast<double>(total_length_) / static_cast<double>(doc_refs_.size());
}

double InvertedIndex::norm_for(std::uint32_t length) const {
    const double avg = avg_doc_length();
    const double rel = avg > 0.0 ? static_cast<double>(length) / avg : 0.0;
    return params_.k1 * (1.0 - params_.b + params_.b * rel);
}

void InvertedIndex::refresh_norms() {
    doc_norms_.resize(doc_lengths_.size());
    for (std::size_t i = 0; i < doc_lengths_.size(); ++i) doc_norms_[i] = norm_for(doc_lengths_[i]);
}

std::optional<InvertedIndex::DocId> InvertedIndex::find_doc(std::string_view doc_ref) const {
    auto it = doc_lookup_.find(std::string(doc_ref));
    if (it == doc_lookup_.end()) return std::nullopt;
    return it->second;
}

std::size_t InvertedIndex::doc_freq(std::string_view term) const {
    auto it = term_lookup_.find(std::string(term));
    return it == term_lookup_.end() ? 0 : postings_[it->second].size();
}

std::vector<std::pair<std::string, std::uint32_t>> InvertedIndex::postings(std::string_view term) const {
    std::vector<std::pair<std::string, std::uint32_t>> out;
    auto it = term_lookup_.find(std::string(term));
    if (it == term_lookup_.end()) return out;
    out.reserve(postings_[it->second].size());
    for (const auto& p : postings_[it->second]) out.emplace_back(doc_refs_[p.doc], p.tf);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> InvertedIndex::sorted_terms() const {
    std::vector<std::string> out(terms_);
    std::sort(out.begin(), out.end());
    return out;
}

double InvertedIndex::idf(std::string_view term) const {
    return idf_value(params_.idf, doc_count(), doc_freq(term));
}

namespace {

// Sorted distinct query terms with multiplicities (ascending term order).
std::vector<std::pair<std::string_view, std::uint32_t>> query_terms(const TokenStream& query) {
    std::vector<std::string_view> sorted(query.begin(), query.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<std::string_view, std::uint32_t>> out;
    for (auto t : sorted) {
        if (!out.empty() && out.back().first == t)
            ++out.back().second;
        else
            out.emplace_back(t, 1);
    }
    return out;
}

}  // namespace

double InvertedIndex::score(const TokenStream& query, std::string_view doc_ref) const {
    const auto doc = find_doc(doc_ref);
    if (!doc) throw std::out_of_range("bm25: unknown document " + std::string(doc_ref));
    const double k1p1 = params_.k1 + 1.0;
    double total = 0.0;
    for (const auto& [term, count] : query_terms(query)) {
        auto it = term_lookup_.find(std::string(term));
        if (it == term_lookup_.end()) continue;
        const auto& plist = postings_[it->second];
        auto p = std::find_if(plist.begin(), plist.end(), [&](const Posting& x) { return x.doc == *doc; });
        if (p == plist.end()) continue;
        const double w = idf_value(params_.idf, doc_count(), plist.size());
        const double tf = p->tf;
        total += count * w * (tf * k1p1) / (tf + doc_norms_[*doc]);
    }
    return total;
}

void InvertedIndex::accumulate(const TokenStream& query, std::vector<double>& scores,
                               std::vector<DocId>& touched) const {
    const double k1p1 = params_.k1 + 1.0;
    for (const auto& [term, count] : query_terms(query)) {
        auto it = term_lookup_.find(std::string(term));
        if (it == term_lookup_.end()) continue;
        const auto& plist = postings_[it->second];
        const double w = count * idf_value(params_.idf, doc_count(), plist.size());
        for (const auto& p : plist) {
            const double tf = p.tf;
            if (scores[p.doc] == 0.0) touched.push_back(p.doc);
            scores[p.doc] += w * (tf * k1p1) / (tf + doc_norms_[p.doc]);
        }
    }
}

RankedList InvertedIndex::rank(const std::vector<double>& scores, const std::vector<DocId>& touched_in,
                               std::size_t k) const {
    RankedList out;
    if (k == 0 || doc_refs_.empty()) return out;

    std::vector<DocId> touched(touched_in);
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

    auto before = [&](DocId a, DocId b) { return ranks_before(scores[a], doc_refs_[a], scores[b], doc_refs_[b]); };
    const bool all_positive = std::all_of(touched.begin(), touched.end(), [&](DocId d) { return scores[d] > 0.0; });

    std::vector<DocId> chosen;
    if (all_positive) {
        chosen = std::move(touched);
        if (chosen.size() > k) {
            std::partial_sort(chosen.begin(), chosen.begin() + static_cast<std::ptrdiff_t>(k), chosen.end(), before);
            chosen.resize(k);
        } else {
            std::sort(chosen.begin(), chosen.end(), before);
            for (DocId d : docs_by_ref_) {
                if (chosen.size() >= k) break;
                if (scores[d] == 0.0) chosen.push_back(d);
            }
        }
    } else {
        // Negative scores are possible under the Robertson IDF; rank everything.
        chosen.resize(doc_refs_.size());
        for (DocId i = 0; i < chosen.size(); ++i) chosen[i] = i;
        const std::size_t take = std::min(k, chosen.size());
        std::partial_sort(chosen.begin(), chosen.begin() + static_cast<std::ptrdiff_t>(take), chosen.end(), before);
        chosen.resize(take);
    }

    out.reserve(chosen.size());
    for (DocId d : chosen) out.push_back(ScoredDoc{doc_refs_[d], scores[d]});
    return out;
}

RankedList InvertedIndex::search(const TokenStream& query, std::size_t k) const {
    if (k == 0) throw std::invalid_argument("bm25: search requires k >= 1");
    if (doc_refs_.empty()) return {};
    std::vector<double> scores(doc_refs_.size(), 0.0);
    std::vector<DocId> touched;
    accumulate(query, scores, touched);
    return rank(scores, touched, k);
}

bool operator==(const InvertedIndex& a, const InvertedIndex& b) {
    if (!(a.params_ == b.params_) || a.doc_count() != b.doc_count() || a.term_count() != b.term_count() ||
        a.total_length_ != b.total_length_)
        return false;
    for (std::size_t i = 0; i < a.docs_by_ref_.size(); ++i) {
        const InvertedIndex::DocId da = a.docs_by_ref_[i];
        const InvertedIndex::DocId db = b.docs_by_ref_[i];
        if (a.doc_refs_[da] != b.doc_refs_[db] || a.doc_lengths_[da] != b.doc_lengths_[db]) return false;
    }
    for (const auto& term : a.terms_) {
        if (!b.term_lookup_.contains(term)) return false;
        if (a.postings(term) != b.postings(term)) return false;
    }
    return true;
}

}  // namespace crs::bm25
