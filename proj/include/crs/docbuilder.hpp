#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crs/bm25.hpp"
#include "crs/corpus.hpp"
#include "crs/textnorm.hpp"

namespace crs::docs {

enum class Mode : std::uint8_t {
    kFull,          // title + metadata + training contexts
    kNoMetadata,    // title + training contexts; metadata only for items without contexts
    kMetadataOnly,  // title + metadata, no expansion
};

std::string_view to_string(Mode mode);
/// Accepts "full", "no_metadata", "metadata_only"; throws InputError otherwise.
Mode parse_mode(std::string_view text);

struct ItemDocument {
    corpus::ItemId item_id;
    std::string metadata_text;
    std::vector<std::string> contexts;  // training order
    TokenStream tokens;                 // tokenize(metadata_text) ++ tokenize(context_i)...
};

/// Title, then (unless mode is kNoMetadata) plot, director and actors, space-joined.
std::string metadata_text(const corpus::Item& item, const corpus::ItemMetadata* metadata, Mode mode);

ItemDocument make_document(const corpus::Item& item, const corpus::ItemMetadata* metadata,
                           std::vector<std::string> contexts, Mode mode, const Stopwords* stopwords = nullptr);

struct BuildResult {
    std::vector<ItemDocument> documents;  // catalog order
    std::vector<std::string> warnings;
};

/// One document per catalog item. Contexts are the query texts of the
/// training examples whose gold is that item, in training order.
BuildResult build_documents(const corpus::Catalog& catalog, const corpus::MetadataTable& metadata,
                            std::span<const corpus::RecExample> train_examples, Mode mode,
                            const Stopwords* stopwords = nullptr);

/// Documents plus the global BM25 index over them, kept in lockstep.
class ItemIndex {
public:
    ItemIndex() = default;

    static ItemIndex build(corpus::Catalog catalog, corpus::MetadataTable metadata,
                           std::span<const corpus::RecExample> train_examples, Mode mode, bm25::Params params,
                           Stopwords stopwords = {}, std::vector<std::string>* warnings = nullptr);

    /// Reassembles from persisted parts; `index` must cover exactly `documents`.
    static ItemIndex from_parts(corpus::Catalog catalog, corpus::MetadataTable metadata,
                                std::vector<ItemDocument> documents, bm25::InvertedIndex index, Mode mode,
                                Stopwords stopwords = {});

    /// Adds a new item and pushes its document into the index.
    /// Throws InputError when the id is already present.
    const ItemDocument& register_new_item(const corpus::Item& item, const corpus::ItemMetadata* metadata,
                                          std::vector<std::string> contexts = {});

    TokenStream tokenize(std::string_view text) const { return crs::tokenize(text, stopwords_ptr()); }

    const corpus::Catalog& catalog() const { return catalog_; }
    const corpus::MetadataTable& metadata() const { return metadata_; }
    const std::vector<ItemDocument>& documents() const { return documents_; }
    const bm25::InvertedIndex& index() const { return index_; }
    Mode mode() const { return mode_; }
    const Stopwords& stopwords() const { return stopwords_; }

private:
    const Stopwords* stopwords_ptr() const { return stopwords_.empty() ? nullptr : &stopwords_; }

    corpus::Catalog catalog_;
    corpus::MetadataTable metadata_;
    std::vector<ItemDocument> documents_;
    bm25::InvertedIndex index_;
    Mode mode_ = Mode::kFull;
    Stopwords stopwords_;
};

}  // namespace crs::docs
