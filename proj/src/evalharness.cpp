#include "crs/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace crs::eval {

int recall_at_k(const bm25::RankedList& ranked, const corpus::ItemId& gold, std::size_t k) {
    if (k == 0) throw std::invalid_argument("recall_at_k requires k >= 1");
    const std::size_t n = std::min(k, ranked.size());
    for (std::size_t i = 0; i < n; ++i)
        if (ranked[i].doc_ref == gold) return 1;
    return 0;
}

RecallTable recall_from_records(std::span<const ExampleRecord> records, const std::vector<std::size_t>& ks) {
    RecallTable out;
    for (auto k : ks) {
        if (records.empty()) {
            out[k] = std::nullopt;
            continue;
        }
        std::size_t hits = 0;
        for (const auto& r : records)
            if (r.rank && *r.rank <= k) ++hits;
        out[k] = static_cast<double>(hits) / static_cast<double>(records.size());
    }
    return out;
}

EvalReport evaluate(const Retriever& retriever, std::span<const corpus::RecExample> test,
                    const std::vector<std::size_t>& ks, std::size_t threads) {
    EvalReport report;
    report.ks = ks;
    std::sort(report.ks.begin(), report.ks.end());
    report.ks.erase(std::unique(report.ks.begin(), report.ks.end()), report.ks.end());
    if (!report.ks.empty() && report.ks.front() == 0) throw std::invalid_argument("evaluate: k must be >= 1");

    std::vector<const corpus::RecExample*> queries;
    for (const auto& ex : test) {
        if (ex.synthetic)
            ++report.skipped_synthetic;
        else
            queries.push_back(&ex);
    }
    const std::size_t depth = std::max(kRecordDepth, report.ks.empty() ? 0 : report.ks.back());

    report.records.resize(queries.size());
    auto run_one = [&](std::size_t i) {
        const auto& ex = *queries[i];
        const auto ranked = retriever(ex);
        ExampleRecord rec;
        rec.example_id = ex.example_id;
        rec.gold = ex.gold_item_id;
        for (std::size_t pos = 0; pos < ranked.size() && pos < depth; ++pos) {
            if (!rec.rank && ranked[pos].doc_ref == ex.gold_item_id) rec.rank = pos + 1;
            if (pos < kRecordDepth) rec.top.push_back(ranked[pos].doc_ref);
        }
        report.records[i] = std::move(rec);
    };

    threads = std::max<std::size_t>(1, std::min(threads, queries.size()));
    if (threads == 1) {
        for (std::size_t i = 0; i < queries.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < queries.size(); i = next++) run_one(i);
            });
        }
    }

    report.recall = recall_from_records(report.records, report.ks);
    report.config["examples"] = report.records.size();
    report.config["ks"] = report.ks;
    return report;
}

std::string Bucket::label() const {
    if (!hi) return std::to_string(lo) + "+";
    if (*hi == lo) return std::to_string(lo);
    return std::to_string(lo) + "-" + std::to_string(*hi);
}

std::vector<Bucket> make_buckets(const std::vector<std::size_t>& edges) {
    if (edges.empty() || edges.front() != 0) throw std::invalid_argument("bucket edges must start at 0");
    std::vector<Bucket> out;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (i > 0 && edges[i] <= edges[i - 1]) throw std::invalid_argument("bucket edges must be strictly increasing");
        Bucket b{edges[i], std::nullopt};
        if (i + 1 < edges.size()) b.hi = edges[i + 1] - 1;
        out.push_back(b);
    }
    return out;
}

std::vector<BucketRow> frequency_buckets(std::span<const corpus::RecExample> train_examples,
                                         const EvalReport& report, const std::vector<std::size_t>& edges) {
    std::map<corpus::ItemId, std::size_t> freq;
    for (const auto& ex : train_examples)
        if (!ex.synthetic) ++freq[ex.gold_item_id];

    const auto buckets = make_buckets(edges);
    std::vector<std::vector<ExampleRecord>> grouped(buckets.size());
    std::vector<std::set<corpus::ItemId>> items(buckets.size());
    for (const auto& rec : report.records) {
        auto it = freq.find(rec.gold);
        const std::size_t f = it == freq.end() ? 0 : it->second;
        std::size_t b = buckets.size() - 1;
        while (buckets[b].lo > f) --b;
        grouped[b].push_back(rec);
        items[b].insert(rec.gold);
    }

    std::vector<BucketRow> out;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        BucketRow row;
        row.bucket = buckets[b];
        row.item_count = items[b].size();
        row.example_count = grouped[b].size();
        row.recall = recall_from_records(grouped[b], kDefaultKs);
        out.push_back(std::move(row));
    }
    return out;
}

Retriever bm25_retriever(const docs::ItemIndex& index, std::size_t depth) {
    return [&index, depth](const corpus::RecExample& ex) {
        return index.index().search(index.tokenize(ex.query_text), depth);
    };
}

std::vector<SweepRow> augmentation_sweep(std::span<const corpus::RecExample> base_train,
                                         std::span<const corpus::Dialogue> synthetic_pool,
                                         const std::vector<std::size_t>& counts,
                                         std::span<const corpus::RecExample> test, const SweepSetup& setup) {
    if (!setup.catalog || !setup.metadata) throw std::invalid_argument("augmentation_sweep: catalog/metadata missing");

    std::map<corpus::ItemId, std::size_t> available;
    for (const auto& d : synthetic_pool)
        if (d.synthetic && d.target_item_id) ++available[*d.target_item_id];

    std::vector<SweepRow> rows;
    for (auto count : counts) {
        SweepRow row;
        row.count = count;
        auto cfg = setup.augment;
        cfg.max_dialogues_per_item = count;
        auto pool = augment::merge(base_train, synthetic_pool, cfg);
        row.synthetic_merged = pool.size() - base_train.size();
        for (const auto& [item, n] : available) {
            if (n < count)
                row.notes.push_back(item + ": only " + std::to_string(n) + " synthetic dialogue(s) for count " +
                                    std::to_string(count));
        }
        auto index = docs::ItemIndex::build(*setup.catalog, *setup.metadata, pool, setup.mode, setup.params,
                                            setup.stopwords);
        row.report = evaluate(bm25_retriever(index), test, kDefaultKs, setup.threads);
        row.recall = row.report.recall;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_recall(const std::optional<double>& value) {
    if (!value) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *value);
    return buf;
}

void write_records_jsonl(std::ostream& out, const EvalReport& report) {
    for (const auto& r : report.records) {
        nlohmann::json j = {{"example_id", r.example_id}, {"gold", r.gold}, {"top", r.top}};
        j["rank"] = r.rank ? nlohmann::json(*r.rank) : nlohmann::json(nullptr);
        out << j.dump() << '\n';
    }
}

void write_summary(std::ostream& out, const EvalReport& report) {
    out << "examples: " << report.records.size() << '\n';
    if (report.skipped_synthetic > 0) out << "skipped synthetic queries: " << report.skipped_synthetic << '\n';
    for (auto k : report.ks) {
        const auto& v = report.recall.at(k);
        out << "R@" << k << ": " << (v ? format_recall(v) : std::string("n/a")) << '\n';
    }
    out << "config: " << report.config.dump() << '\n';
}

namespace {
std::string cell(const RecallTable& t, std::size_t k) {
    auto it = t.find(k);
    return it == t.end() ? std::string() : format_recall(it->second);
}
}  // namespace

void write_bucket_csv(std::ostream& out, std::span<const BucketRow> rows) {
    out << "bucket_or_count,examples,r1,r10,r50\n";
    for (const auto& r : rows) {
        out << r.bucket.label() << ',' << r.example_count << ',' << cell(r.recall, 1) << ',' << cell(r.recall, 10)
            << ',' << cell(r.recall, 50) << '\n';
    }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows, std::size_t test_examples) {
    out << "bucket_or_count,examples,r1,r10,r50\n";
    for (const auto& r : rows) {
        out << r.count << ',' << (r.report.records.empty() ? test_examples : r.report.records.size()) << ','
            << cell(r.recall, 1) << ',' << cell(r.recall, 10) << ',' << cell(r.recall, 50) << '\n';
    }
}

}  // namespace crs::eval
