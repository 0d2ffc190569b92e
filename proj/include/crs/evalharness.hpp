#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/augment.hpp"
#include "crs/bm25.hpp"
#include "crs/corpus.hpp"
#include "crs/docbuilder.hpp"

namespace crs::eval {

using Retriever = std::function<bm25::RankedList(const corpus::RecExample&)>;

inline const std::vector<std::size_t> kDefaultKs{1, 10, 50};
inline constexpr std::size_t kRecordDepth = 50;

struct ExampleRecord {
    std::string example_id;
    corpus::ItemId gold;
    std::optional<std::size_t> rank;  // 1-based, absent beyond the retrieval depth
    std::vector<corpus::ItemId> top;  // first kRecordDepth ids
    bool operator==(const ExampleRecord&) const = default;
};

using RecallTable = std::map<std::size_t, std::optional<double>>;

struct EvalReport {
    std::vector<ExampleRecord> records;  // input order
    std::vector<std::size_t> ks;
    /// Mean hit rate per k; nullopt when there were no examples.
    RecallTable recall;
    std::size_t skipped_synthetic = 0;
    nlohmann::json config = nlohmann::json::object();
};

/// 1 iff gold is among the first k entries.
int recall_at_k(const bm25::RankedList& ranked, const corpus::ItemId& gold, std::size_t k);

/// Runs `retriever` on every non-synthetic example (in parallel when
/// `threads` > 1) and aggregates Recall@k. The retriever must be thread-safe.
EvalReport evaluate(const Retriever& retriever, std::span<const corpus::RecExample> test,
                    const std::vector<std::size_t>& ks = kDefaultKs, std::size_t threads = 1);

/// Recall@k recomputed from per-example ranks.
RecallTable recall_from_records(std::span<const ExampleRecord> records, const std::vector<std::size_t>& ks);

struct Bucket {
    std::size_t lo = 0;
    std::optional<std::size_t> hi;  // inclusive; nullopt = unbounded
    std::string label() const;
};

/// Lower bounds, strictly increasing, first must be 0.
inline const std::vector<std::size_t> kDefaultBucketEdges{0, 1, 3, 6, 11, 21, 51};

std::vector<Bucket> make_buckets(const std::vector<std::size_t>& lower_edges);

struct BucketRow {
    Bucket bucket;
    std::size_t item_count = 0;     // distinct gold items among the bucket's test examples
    std::size_t example_count = 0;
    RecallTable recall;             // k in {1, 10, 50}
};

/// Groups report records by the genuine training frequency of their gold item.
std::vector<BucketRow> frequency_buckets(std::span<const corpus::RecExample> train_examples,
                                         const EvalReport& report,
                                         const std::vector<std::size_t>& lower_edges = kDefaultBucketEdges);

/// Everything needed to rebuild the item documents for one sweep point.
struct SweepSetup {
    const corpus::Catalog* catalog = nullptr;
    const corpus::MetadataTable* metadata = nullptr;
    docs::Mode mode = docs::Mode::kFull;
    bm25::Params params{};
    Stopwords stopwords{};
    augment::AugmentConfig augment{};
    std::size_t threads = 1;
};

struct SweepRow {
    std::size_t count = 0;
    std::size_t synthetic_merged = 0;
    RecallTable recall;
    EvalReport report;
    std::vector<std::string> notes;
};

/// For each count c: merge at most c synthetic dialogues per item into the
/// training pool, rebuild documents and index, evaluate plain BM25.
std::vector<SweepRow> augmentation_sweep(std::span<const corpus::RecExample> base_train,
                                         std::span<const corpus::Dialogue> synthetic_pool,
                                         const std::vector<std::size_t>& counts,
                                         std::span<const corpus::RecExample> test, const SweepSetup& setup);

/// Plain global-index retriever over an ItemIndex.
Retriever bm25_retriever(const docs::ItemIndex& index, std::size_t depth = kRecordDepth);

// Report files.
void write_records_jsonl(std::ostream& out, const EvalReport& report);
void write_summary(std::ostream& out, const EvalReport& report);
/// Columns: bucket_or_count, examples, r1, r10, r50.
void write_bucket_csv(std::ostream& out, std::span<const BucketRow> rows);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows, std::size_t test_examples);
std::string format_recall(const std::optional<double>& value);

}  // namespace crs::eval
