#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crs/textnorm.hpp"

namespace crs::bm25 {

enum class IdfVariant : std::uint8_t {
    /// ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
    kNonNegative = 0,
    /// Classic Robertson/Sparck-Jones ln((N - df + 0.5) / (df + 0.5)); negative once df > N/2.
    kRobertson = 1,
};

struct Params {
    double k1 = 1.6;
    double b = 0.7;
    IdfVariant idf = IdfVariant::kNonNegative;

    /// Throws std::invalid_argument unless k1 >= 0 and 0 <= b <= 1.
    void validate() const;
    bool operator==(const Params&) const = default;
};

struct ScoredDoc {
    std::string doc_ref;
    double score = 0.0;
    bool operator==(const ScoredDoc&) const = default;
};

/// Descending score, ties by ascending doc_ref, no duplicates.
using RankedList = std::vector<ScoredDoc>;

/// Strict total order used everywhere a ranking is produced.
inline bool ranks_before(double score_a, std::string_view ref_a, double score_b, std::string_view ref_b) {
    if (score_a != score_b) return score_a > score_b;
    return ref_a < ref_b;
}

double idf_value(IdfVariant variant, std::size_t doc_count, std::size_t doc_freq);

/// Metadata carried in the persisted file header next to the index itself.
struct FileHeader {
    std::uint64_t catalog_version = 0;
};

/// Okapi BM25 over an in-memory inverted index. Documents are addressed by an
/// opaque string `doc_ref`; internally they get dense ids in insertion order.
/// Scores do not depend on insertion order: per-document contributions are
/// always summed in ascending term order.
class InvertedIndex {
public:
    using DocId = std::uint32_t;
    using TermId = std::uint32_t;

    struct Posting {
        DocId doc;
        std::uint32_t tf;
    };

    InvertedIndex() = default;
    explicit InvertedIndex(Params params);

    /// Throws InputError on a duplicate doc_ref.
    static InvertedIndex build(std::span<const std::pair<std::string, TokenStream>> docs, Params params = {});

    /// Throws InputError when doc_ref is already indexed.
    void add_document(std::string doc_ref, const TokenStream& tokens);

    const Params& params() const { return params_; }
    std::size_t doc_count() const { return doc_refs_.size(); }
    std::size_t term_count() const { return terms_.size(); }
    double avg_doc_length() const;
    std::uint64_t total_length() const { return total_length_; }

    bool contains(std::string_view doc_ref) const { return find_doc(doc_ref).has_value(); }
    std::optional<DocId> find_doc(std::string_view doc_ref) const;
    const std::string& doc_ref(DocId id) const { return doc_refs_.at(id); }
    std::uint32_t doc_length(DocId id) const { return doc_lengths_.at(id); }

    std::size_t doc_freq(std::string_view term) const;
    /// Postings of `term` as (doc_ref, tf), sorted by doc_ref.
    std::vector<std::pair<std::string, std::uint32_t>> postings(std::string_view term) const;
    /// All indexed terms in ascending order.
    std::vector<std::string> sorted_terms() const;
    /// Doc ids sorted by ascending doc_ref.
    const std::vector<DocId>& docs_by_ref() const { return docs_by_ref_; }

    double idf(std::string_view term) const;

    /// BM25 of one document. Repeated query tokens count once per occurrence.
    /// Throws std::out_of_range for an unknown doc_ref.
    double score(const TokenStream& query, std::string_view doc_ref) const;

    /// Adds the score of every document sharing a term with `query` into
    /// `scores` (sized to doc_count()), recording first-touched ids in `touched`.
    /// `scores` entries for untouched documents must be zero on entry.
    void accumulate(const TokenStream& query, std::vector<double>& scores, std::vector<DocId>& touched) const;

    /// Top-k documents. Zero-score documents only fill up when fewer than k
    /// documents score positive, in ascending doc_ref order.
    RankedList search(const TokenStream& query, std::size_t k) const;

    /// Ranks a dense score vector (indexed by DocId) with the index's tie-break.
    /// `touched` lists every id whose score may be non-zero.
    RankedList rank(const std::vector<double>& scores, const std::vector<DocId>& touched, std::size_t k) const;

    /// Writes the canonical binary form. Output depends only on the document
    /// set, never on insertion order.
    void save(std::ostream& out, const FileHeader& header = {}) const;
    static InvertedIndex load(std::istream& in, FileHeader* header = nullptr);

    /// Observational equality: params, documents, lengths and postings.
    friend bool operator==(const InvertedIndex& a, const InvertedIndex& b);

private:
    void insert_document(std::string doc_ref, const TokenStream& tokens);
    void refresh_norms();
    double norm_for(std::uint32_t length) const;

    Params params_{};
    std::vector<std::string> doc_refs_;
    std::vector<std::uint32_t> doc_lengths_;
    std::vector<double> doc_norms_;
    std::vector<DocId> docs_by_ref_;
    std::unordered_map<std::string, DocId> doc_lookup_;
    std::vector<std::string> terms_;
    std::unordered_map<std::string, TermId> term_lookup_;
    std::vector<std::vector<Posting>> postings_;
    std::uint64_t total_length_ = 0;
};

}  // namespace crs::bm25
