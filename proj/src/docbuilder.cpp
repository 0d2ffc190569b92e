#include "crs/docbuilder.hpp"

#include "crs/errors.hpp"

namespace crs::docs {

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::kNoMetadata: return "no_metadata";
        case Mode::kMetadataOnly: return "metadata_only";
        case Mode::kFull:
        default: return "full";
    }
}

Mode parse_mode(std::string_view text) {
    if (text == "full") return Mode::kFull;
    if (text == "no_metadata") return Mode::kNoMetadata;
    if (text == "metadata_only") return Mode::kMetadataOnly;
    throw InputError("unknown document mode '" + std::string(text) + "' (expected full|no_metadata|metadata_only)");
}

std::string metadata_text(const corpus::Item& item, const corpus::ItemMetadata* md, Mode mode) {
    std::string out = item.title;
    if (mode == Mode::kNoMetadata || md == nullptr) return out;
    auto append = [&](const std::string& s) {
        if (s.empty()) return;
        if (!out.empty()) out.push_back(' ');
        out += s;
    };
    append(md->plot);
    append(md->director);
    for (const auto& actor : md->actors) append(actor);
    return out;
}

ItemDocument make_document(const corpus::Item& item, const corpus::ItemMetadata* md,
                           std::vector<std::string> contexts, Mode mode, const Stopwords* stopwords) {
    ItemDocument doc;
    doc.item_id = item.item_id;
    // An item nobody has talked about has nothing but its metadata, whatever the mode.
    doc.metadata_text = metadata_text(item, md, contexts.empty() ? Mode::kMetadataOnly : mode);
    if (mode != Mode::kMetadataOnly) doc.contexts = std::move(contexts);
    tokenize_into(doc.metadata_text, doc.tokens, stopwords);
    for (const auto& ctx : doc.contexts) tokenize_into(ctx, doc.tokens, stopwords);
    return doc;
}

BuildResult build_documents(const corpus::Catalog& catalog, const corpus::MetadataTable& metadata,
                            std::span<const corpus::RecExample> train_examples, Mode mode,
                            const Stopwords* stopwords) {
    BuildResult result;
    for (const auto& [id, _] : metadata) {
        if (!catalog.contains(id)) result.warnings.push_back("metadata for unknown item " + id + " ignored");
    }

    std::map<corpus::ItemId, std::vector<std::string>> contexts;
    for (const auto& ex : train_examples) {
        if (!catalog.contains(ex.gold_item_id)) {
            result.warnings.push_back("training example " + ex.example_id + " targets unknown item " +
                                      ex.gold_item_id);
            continue;
        }
        contexts[ex.gold_item_id].push_back(ex.query_text);
    }

    result.documents.reserve(catalog.size());
    for (const auto& [id, item] : catalog) {
        auto md = metadata.find(id);
        auto ctx = contexts.find(id);
        result.documents.push_back(make_document(item, md == metadata.end() ? nullptr : &md->second,
                                                 ctx == contexts.end() ? std::vector<std::string>{}
                                                                       : std::move(ctx->second),
                                                 mode, stopwords));
    }
    return result;
}

ItemIndex ItemIndex::build(corpus::Catalog catalog, corpus::MetadataTable metadata,
                           std::span<const corpus::RecExample> train_examples, Mode mode, bm25::Params params,
                           Stopwords stopwords, std::vector<std::string>* warnings) {
    ItemIndex out;
    out.mode_ = mode;
    out.stopwords_ = std::move(stopwords);
    auto built = build_documents(catalog, metadata, train_examples, mode, out.stopwords_ptr());
    if (warnings) warnings->insert(warnings->end(), built.warnings.begin(), built.warnings.end());
    // Rows for unknown items are dropped.
    std::erase_if(metadata, [&](const auto& kv) { return !catalog.contains(kv.first); });

    std::vector<std::pair<std::string, TokenStream>> docs;
    docs.reserve(built.documents.size());
    for (const auto& d : built.documents) docs.emplace_back(d.item_id, d.tokens);
    out.index_ = bm25::InvertedIndex::build(docs, params);
    out.catalog_ = std::move(catalog);
    out.metadata_ = std::move(metadata);
    out.documents_ = std::move(built.documents);
    return out;
}

ItemIndex ItemIndex::from_parts(corpus::Catalog catalog, corpus::MetadataTable metadata,
                                std::vector<ItemDocument> documents, bm25::InvertedIndex index, Mode mode,
                                Stopwords stopwords) {
    if (documents.size() != index.doc_count() || catalog.size() != documents.size())
        throw InputError("catalog, documents and index disagree on item count");
    for (const auto& d : documents) {
        if (!index.contains(d.item_id) || !catalog.contains(d.item_id))
            throw InputError("document " + d.item_id + " missing from index or catalog");
    }
    ItemIndex out;
    out.catalog_ = std::move(catalog);
    out.metadata_ = std::move(metadata);
    out.documents_ = std::move(documents);
    out.index_ = std::move(index);
    out.mode_ = mode;
    out.stopwords_ = std::move(stopwords);
    return out;
}

const ItemDocument& ItemIndex::register_new_item(const corpus::Item& item, const corpus::ItemMetadata* md,
                                                 std::vector<std::string> contexts) {
    if (item.item_id.empty() || item.title.empty()) throw InputError("new item needs a non-empty id and title");
    if (catalog_.contains(item.item_id) || index_.contains(item.item_id))
        throw InputError("item already present: " + item.item_id);
    ItemDocument doc = make_document(item, md, std::move(contexts), mode_, stopwords_ptr());
    index_.add_document(doc.item_id, doc.tokens);
    catalog_.emplace(item.item_id, item);
    if (md) {
        corpus::ItemMetadata copy = *md;
        copy.item_id = item.item_id;
        metadata_.insert_or_assign(item.item_id, std::move(copy));
    }
    documents_.push_back(std::move(doc));
    return documents_.back();
}

}  // namespace crs::docs
