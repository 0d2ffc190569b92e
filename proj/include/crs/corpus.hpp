#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace crs::corpus {

using ItemId = std::string;
using UserId = std::int64_t;

/// Reserved seeker id for generated dialogues.
inline constexpr UserId kSyntheticUser = -1;

struct Item {
    ItemId item_id;
    std::string title;
    bool operator==(const Item&) const = default;
};

struct ItemMetadata {
    ItemId item_id;
    std::string plot;
    std::string director;
    std::vector<std::string> actors;
    bool operator==(const ItemMetadata&) const = default;
};

using Catalog = std::map<ItemId, Item>;
using MetadataTable = std::map<ItemId, ItemMetadata>;

enum class Role : std::uint8_t { kSeeker, kAgent };

struct Mention {
    ItemId item_id;
    std::size_t begin = 0;  // byte offset of '@'
    std::size_t end = 0;    // one past the last digit
    bool operator==(const Mention&) const = default;
};

struct Turn {
    Role role = Role::kSeeker;
    UserId speaker_id = 0;
    std::int64_t message_id = 0;
    std::int64_t time_offset = 0;
    std::string text;               // raw, with inline @<id> markers
    std::vector<Mention> mentions;  // resolved markers, by start offset
    bool operator==(const Turn&) const = default;
};

// ReDial questionnaire codes.
enum class Seen : std::uint8_t { kNotSeen = 0, kSeen = 1, kDidntSay = 2 };
enum class Liked : std::uint8_t { kDisliked = 0, kLiked = 1, kDidntSay = 2 };

struct Opinion {
    int suggested = 0;
    Seen seen = Seen::kDidntSay;
    Liked liked = Liked::kDidntSay;
    bool operator==(const Opinion&) const = default;
};

struct Dialogue {
    std::string dialogue_id;
    UserId seeker_id = 0;
    UserId agent_id = 0;
    std::vector<Turn> turns;
    std::map<ItemId, std::string> mention_table;
    std::map<ItemId, Opinion> seeker_opinions;
    std::map<ItemId, Opinion> agent_opinions;
    bool synthetic = false;
    std::optional<ItemId> target_item_id;
    bool operator==(const Dialogue&) const = default;
};

struct RecExample {
    std::string example_id;
    std::string dialogue_id;
    UserId user_id = 0;
    std::string query_text;
    /// Byte offset in query_text where the masked agent response begins.
    std::size_t masked_offset = 0;
    ItemId gold_item_id;
    std::size_t turn_index = 0;
    /// Items mentioned in the preceding turns, first-mention order.
    std::vector<ItemId> context_items;
    bool synthetic = false;
    bool operator==(const RecExample&) const = default;
};

enum class RecPolicy : std::uint8_t {
    kAllAgentMentions,
    /// Skip targets the seeker already mentioned earlier in the dialogue.
    kFirstMentionOnly,
};

struct ParseOptions {
    bool strict = false;  // abort on the first malformed line
};

struct ParseResult {
    Catalog catalog;
    std::vector<Dialogue> dialogues;
    std::vector<std::string> warnings;
    std::size_t malformed_lines = 0;
    std::size_t unresolved_mentions = 0;
};

/// Line-delimited ReDial records. Also accepts the synthetic exchange format
/// (extra `synthetic` / `target_item_id` fields).
ParseResult parse_redial(std::istream& in, const ParseOptions& options = {});
ParseResult parse_redial_file(const std::string& path, const ParseOptions& options = {});

/// Parses one record; throws InputError on schema violations.
Dialogue parse_dialogue(const nlohmann::json& record, std::vector<std::string>* warnings = nullptr,
                        std::size_t* unresolved = nullptr);

nlohmann::json to_redial_json(const Dialogue& dialogue);
void write_redial(std::ostream& out, std::span<const Dialogue> dialogues);

/// Finds resolved `@<digits>` markers in `text`.
std::vector<Mention> find_mentions(const std::string& text, const std::map<ItemId, std::string>& table,
                                   std::size_t* unresolved = nullptr);

/// Replaces every resolved marker with the item's title.
std::string render_turn(const Turn& turn, const std::map<ItemId, std::string>& table);

struct MetadataFile {
    Catalog items;
    MetadataTable metadata;
    std::vector<std::string> warnings;
};

/// Line-delimited {item_id, title, plot, director, actors}.
MetadataFile parse_metadata(std::istream& in, const ParseOptions& options = {});
MetadataFile parse_metadata_file(const std::string& path, const ParseOptions& options = {});
nlohmann::json to_metadata_json(const Item& item, const ItemMetadata* metadata);

/// Adds items not already present; existing titles win.
void merge_catalog(Catalog& into, const Catalog& from);

std::vector<RecExample> extract_examples(const Dialogue& dialogue, RecPolicy policy = RecPolicy::kAllAgentMentions);
std::vector<RecExample> extract_all(std::span<const Dialogue> dialogues,
                                    RecPolicy policy = RecPolicy::kAllAgentMentions);

/// Items `role` marked liked; falls back to every item that role mentioned
/// when the dialogue has no questionnaire for it.
std::set<ItemId> liked_items(const Dialogue& dialogue, Role role = Role::kSeeker);

/// Seeker-liked items among those mentioned before the masked turn.
std::set<ItemId> query_liked(const Dialogue& dialogue, const RecExample& example);

nlohmann::json to_json(const RecExample& example);
RecExample example_from_json(const nlohmann::json& j);

}  // namespace crs::corpus
