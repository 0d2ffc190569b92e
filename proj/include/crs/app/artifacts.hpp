#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/corpus.hpp"
#include "crs/docbuilder.hpp"
#include "crs/userselect.hpp"

namespace crs::app {

/// Everything a built index directory holds, loaded into memory.
struct Engine {
    docs::ItemIndex items;
    std::shared_ptr<const users::Profiles> profiles = std::make_shared<users::Profiles>();
    std::vector<corpus::RecExample> train_examples;
    corpus::RecPolicy policy = corpus::RecPolicy::kAllAgentMentions;
    /// Build report minus timing; rewritten on every snapshot.
    nlohmann::json report = nlohmann::json::object();
};

/// FNV-1a over the sorted (item_id, title) pairs.
std::uint64_t catalog_version(const corpus::Catalog& catalog);
std::string hex64(std::uint64_t value);

std::string_view to_string(corpus::RecPolicy policy);
corpus::RecPolicy parse_policy(std::string_view text);

// Layout: <dir>/CURRENT names the live snapshot directory <dir>/snap-NNNNNN,
// which holds build_report.json, timing.json, index.bin, profiles.bin,
// catalog.jsonl, documents.jsonl, train_examples.jsonl and, when used,
// stopwords.txt. A new snapshot becomes visible by atomically renaming a
// fresh CURRENT file over the old one.

/// Writes a new snapshot and swaps CURRENT to it. Returns the snapshot path.
/// `wall_seconds` goes to timing.json, the only non-deterministic file.
std::filesystem::path write_snapshot(const std::filesystem::path& dir, Engine& engine, double wall_seconds);

std::filesystem::path current_snapshot(const std::filesystem::path& dir);

/// Loads the live snapshot, verifying that index, report and catalog agree
/// on the catalog version (InputError otherwise).
Engine load_engine(const std::filesystem::path& dir);

/// Atomic file replace via a sibling temp file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace crs::app
