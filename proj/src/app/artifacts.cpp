#include "crs/app/artifacts.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "crs/errors.hpp"

namespace crs::app {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;
constexpr std::string_view kSnapshotPrefix = "snap-";

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string snapshot_name(unsigned n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snap-%06u", n);
    return buf;
}

unsigned snapshot_number(const std::string& name) {
    if (!name.starts_with(kSnapshotPrefix)) return 0;
    try {
        return static_cast<unsigned>(std::stoul(name.substr(kSnapshotPrefix.size())));
    } catch (const std::exception&) {
        return 0;
    }
}

std::string jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("missing artifact: " + path.string());
    std::vector<json> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw InputError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return rows;
}

const char* idf_name(bm25::IdfVariant v) { return v == bm25::IdfVariant::kRobertson ? "robertson" : "non_negative"; }

}  // namespace

std::uint64_t catalog_version(const corpus::Catalog& catalog) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [id, item] : catalog) {
        h = fnv1a(id, h);
        h = fnv1a(std::string_view("\0", 1), h);
        h = fnv1a(item.title, h);
        h = fnv1a(std::string_view("\0", 1), h);
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string_view to_string(corpus::RecPolicy policy) {
    return policy == corpus::RecPolicy::kFirstMentionOnly ? "first_mention" : "all_agent_mentions";
}

corpus::RecPolicy parse_policy(std::string_view text) {
    if (text == "all_agent_mentions" || text == "all") return corpus::RecPolicy::kAllAgentMentions;
    if (text == "first_mention" || text == "first") return corpus::RecPolicy::kFirstMentionOnly;
    throw InputError("unknown recommendation policy '" + std::string(text) + "'");
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp-" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path current_snapshot(const fs::path& dir) {
    const fs::path pointer = dir / "CURRENT";
    if (!fs::exists(pointer)) throw InputError("not an index directory (no CURRENT): " + dir.string());
    std::string name = read_file(pointer);
    while (!name.empty() && (name.back() == '\n' || name.back() == '\r')) name.pop_back();
    if (snapshot_number(name) == 0) throw InputError("corrupt CURRENT pointer in " + dir.string());
    return dir / name;
}

fs::path write_snapshot(const fs::path& dir, Engine& engine, double wall_seconds) {
    fs::create_directories(dir);
    unsigned next = 1;
    std::string previous;
    if (fs::exists(dir / "CURRENT")) {
        previous = current_snapshot(dir).filename().string();
        next = snapshot_number(previous) + 1;
    }
    const fs::path snap = dir / snapshot_name(next);
    fs::remove_all(snap);
    fs::create_directories(snap);

    const auto& items = engine.items;
    const auto version = catalog_version(items.catalog());

    {
        std::ofstream out(snap / "index.bin", std::ios::binary);
        items.index().save(out, bm25::FileHeader{version});
    }
    {
        std::ofstream out(snap / "profiles.bin", std::ios::binary);
        users::save_profiles(out, *engine.profiles);
    }

    std::vector<json> catalog_rows;
    for (const auto& [id, item] : items.catalog()) {
        auto md = items.metadata().find(id);
        catalog_rows.push_back(corpus::to_metadata_json(item, md == items.metadata().end() ? nullptr : &md->second));
    }
    const std::string catalog_text = jsonl(catalog_rows);

    std::vector<const docs::ItemDocument*> sorted_docs;
    for (const auto& d : items.documents()) sorted_docs.push_back(&d);
    std::sort(sorted_docs.begin(), sorted_docs.end(),
              [](const auto* a, const auto* b) { return a->item_id < b->item_id; });
    std::vector<json> doc_rows;
    for (const auto* d : sorted_docs) {
        doc_rows.push_back({{"item_id", d->item_id},
                            {"metadata_text", d->metadata_text},
                            {"contexts", d->contexts},
                            {"token_count", d->tokens.size()}});
    }
    const std::string docs_text = jsonl(doc_rows);

    std::vector<json> example_rows;
    for (const auto& ex : engine.train_examples) example_rows.push_back(corpus::to_json(ex));

    std::ofstream(snap / "catalog.jsonl", std::ios::binary) << catalog_text;
    std::ofstream(snap / "documents.jsonl", std::ios::binary) << docs_text;
    std::ofstream(snap / "train_examples.jsonl", std::ios::binary) << jsonl(example_rows);
    if (!items.stopwords().empty()) {
        std::string text;
        for (const auto& w : items.stopwords().sorted()) text += w + "\n";
        std::ofstream(snap / "stopwords.txt", std::ios::binary) << text;
    }

    std::size_t synthetic = 0;
    for (const auto& ex : engine.train_examples) synthetic += ex.synthetic ? 1 : 0;
    const auto& params = items.index().params();
    json& report = engine.report;
    report["format_version"] = kFormatVersion;
    report["mode"] = docs::to_string(items.mode());
    report["policy"] = to_string(engine.policy);
    report["bm25"] = {{"k1", params.k1}, {"b", params.b}, {"idf", idf_name(params.idf)}};
    report["catalog_version"] = hex64(version);
    report["manifest_hash"] = hex64(fnv1a(docs_text));
    report["items"] = items.catalog().size();
    report["metadata_items"] = items.metadata().size();
    report["train_examples"] = engine.train_examples.size() - synthetic;
    report["synthetic_examples"] = synthetic;
    report["users"] = engine.profiles->size();
    report["index_terms"] = items.index().term_count();
    std::ofstream(snap / "build_report.json", std::ios::binary) << report.dump(2) << '\n';
    std::ofstream(snap / "timing.json", std::ios::binary) << json{{"wall_seconds", wall_seconds}}.dump() << '\n';

    write_file_atomic(dir / "CURRENT", snap.filename().string() + "\n");

    // Keep the previous snapshot for readers that still hold it; drop older ones.
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_directory() && snapshot_number(name) != 0 && name != snap.filename().string() &&
            name != previous)
            fs::remove_all(entry.path());
    }
    return snap;
}

Engine load_engine(const fs::path& dir) {
    const fs::path snap = current_snapshot(dir);
    Engine engine;
    try {
        engine.report = json::parse(read_file(snap / "build_report.json"));
    } catch (const json::exception& e) {
        throw InputError("bad build_report.json: " + std::string(e.what()));
    }
    if (engine.report.value("format_version", 0) != kFormatVersion)
        throw InputError("unsupported index directory format in " + snap.string());
    const auto mode = docs::parse_mode(engine.report.value("mode", "full"));
    engine.policy = parse_policy(engine.report.value("policy", "all_agent_mentions"));

    bm25::FileHeader header;
    std::ifstream idx_in(snap / "index.bin", std::ios::binary);
    if (!idx_in) throw InputError("missing index.bin in " + snap.string());
    auto index = bm25::InvertedIndex::load(idx_in, &header);

    std::ifstream prof_in(snap / "profiles.bin", std::ios::binary);
    if (!prof_in) throw InputError("missing profiles.bin in " + snap.string());
    engine.profiles = std::make_shared<users::Profiles>(users::load_profiles(prof_in));

    corpus::Catalog catalog;
    corpus::MetadataTable metadata;
    for (const auto& row : read_jsonl(snap / "catalog.jsonl")) {
        std::istringstream line(row.dump());
        auto parsed = corpus::parse_metadata(line, corpus::ParseOptions{true});
        for (auto& [id, item] : parsed.items) catalog.emplace(id, std::move(item));
        for (auto& [id, md] : parsed.metadata) {
            if (!md.plot.empty() || !md.director.empty() || !md.actors.empty()) metadata.emplace(id, std::move(md));
        }
    }

    const auto version = catalog_version(catalog);
    if (header.catalog_version != version || engine.report.value("catalog_version", "") != hex64(version))
        throw InputError("catalog version mismatch between index, report and catalog in " + snap.string());

    Stopwords stopwords;
    if (fs::exists(snap / "stopwords.txt")) stopwords = Stopwords::load(snap / "stopwords.txt");

    std::vector<docs::ItemDocument> documents;
    for (const auto& row : read_jsonl(snap / "documents.jsonl")) {
        docs::ItemDocument d;
        d.item_id = row.at("item_id").get<std::string>();
        d.metadata_text = row.at("metadata_text").get<std::string>();
        d.contexts = row.at("contexts").get<std::vector<std::string>>();
        const Stopwords* sw = stopwords.empty() ? nullptr : &stopwords;
        tokenize_into(d.metadata_text, d.tokens, sw);
        for (const auto& c : d.contexts) tokenize_into(c, d.tokens, sw);
        auto id = index.find_doc(d.item_id);
        if (!id || index.doc_length(*id) != d.tokens.size())
            throw InputError("documents.jsonl disagrees with index.bin for item " + d.item_id);
        documents.push_back(std::move(d));
    }
    engine.items = docs::ItemIndex::from_parts(std::move(catalog), std::move(metadata), std::move(documents),
                                               std::move(index), mode, std::move(stopwords));

    for (const auto& row : read_jsonl(snap / "train_examples.jsonl"))
        engine.train_examples.push_back(corpus::example_from_json(row));
    return engine;
}

}  // namespace crs::app
