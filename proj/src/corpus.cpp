#include "crs/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "crs/errors.hpp"
#include "crs/textnorm.hpp"

namespace crs::corpus {
namespace {

using nlohmann::json;

std::string id_string(const json& v, const char* field) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw InputError(std::string("field '") + field + "' must be a string or integer");
}

std::int64_t int_field(const json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end()) throw InputError(std::string("missing field '") + field + "'");
    if (it->is_number_integer()) return it->get<std::int64_t>();
    if (it->is_string()) {
        const auto& s = it->get_ref<const std::string&>();
        try {
            std::size_t used = 0;
            auto v = std::stoll(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
    }
    throw InputError(std::string("field '") + field + "' must be an integer");
}

std::int64_t optional_int(const json& obj, const char* field) {
    return obj.contains(field) && !obj[field].is_null() ? int_field(obj, field) : 0;
}

// ReDial writes empty maps as [] in some records.
bool is_empty_container(const json& v) { return v.is_null() || (v.is_array() && v.empty()); }

std::map<ItemId, Opinion> parse_questions(const json& record, const char* field) {
    std::map<ItemId, Opinion> out;
    auto it = record.find(field);
    if (it == record.end() || is_empty_container(*it)) return out;
    if (!it->is_object()) throw InputError(std::string("field '") + field + "' must be an object");
    for (const auto& [id, q] : it->items()) {
        if (!q.is_object()) throw InputError(std::string("questionnaire entry in '") + field + "' must be an object");
        Opinion op;
        op.suggested = static_cast<int>(optional_int(q, "suggested"));
        const auto seen = q.contains("seen") ? int_field(q, "seen") : 2;
        const auto liked = q.contains("liked") ? int_field(q, "liked") : 2;
        if (seen < 0 || seen > 2 || liked < 0 || liked > 2)
            throw InputError("questionnaire codes must be 0, 1 or 2 (item " + id + ")");
        op.seen = static_cast<Seen>(seen);
        op.liked = static_cast<Liked>(liked);
        out.emplace(id, op);
    }
    return out;
}

json questions_json(const std::map<ItemId, Opinion>& opinions) {
    json out = json::object();
    for (const auto& [id, op] : opinions) {
        out[id] = {{"suggested", op.suggested},
                   {"seen", static_cast<int>(op.seen)},
                   {"liked", static_cast<int>(op.liked)}};
    }
    return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string replace_all(std::string text, std::string_view needle, std::string_view replacement) {
    if (needle.empty()) return text;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), replacement);
        pos += replacement.size();
    }
    return text;
}

template <typename Parser>
void for_each_line(std::istream& in, const ParseOptions& options, std::vector<std::string>& warnings,
                   std::size_t& malformed, Parser&& parse_line) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            parse_line(json::parse(line));
        } catch (const std::exception& e) {
            const std::string msg = "line " + std::to_string(line_no) + ": " + e.what();
            if (options.strict) throw InputError(msg);
            warnings.push_back(msg);
            ++malformed;
        }
    }
}

}  // namespace

std::vector<Mention> find_mentions(const std::string& text, const std::map<ItemId, std::string>& table,
                                   std::size_t* unresolved) {
    std::vector<Mention> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '@') continue;
        std::size_t j = i + 1;
        while (j < text.size() && is_digit(text[j])) ++j;
        if (j == i + 1) continue;
        std::string id = text.substr(i + 1, j - i - 1);
        if (table.contains(id)) {
            out.push_back(Mention{std::move(id), i, j});
        } else if (unresolved) {
            ++*unresolved;
        }
        i = j - 1;
    }
    return out;
}

Dialogue parse_dialogue(const json& record, std::vector<std::string>* warnings, std::size_t* unresolved) {
    if (!record.is_object()) throw InputError("record is not a JSON object");
    Dialogue d;
    if (!record.contains("conversationId")) throw InputError("missing field 'conversationId'");
    d.dialogue_id = id_string(record["conversationId"], "conversationId");
    d.seeker_id = int_field(record, "initiatorWorkerId");
    d.agent_id = int_field(record, "respondentWorkerId");

    if (auto it = record.find("movieMentions"); it != record.end() && !is_empty_container(*it)) {
        if (!it->is_object()) throw InputError("field 'movieMentions' must be an object");
        for (const auto& [id, title] : it->items()) {
            d.mention_table.emplace(id, title.is_string() ? title.get<std::string>() : std::string());
        }
    }
    d.seeker_opinions = parse_questions(record, "initiatorQuestions");
    d.agent_opinions = parse_questions(record, "respondentQuestions");
    if (auto it = record.find("synthetic"); it != record.end() && it->is_boolean()) d.synthetic = it->get<bool>();
    if (auto it = record.find("target_item_id"); it != record.end() && !it->is_null())
        d.target_item_id = id_string(*it, "target_item_id");

    auto msgs = record.find("messages");
    if (msgs == record.end() || !msgs->is_array()) throw InputError("field 'messages' must be an array");
    if (msgs->empty()) throw InputError("dialogue " + d.dialogue_id + " has no messages");
    for (const auto& m : *msgs) {
        if (!m.is_object()) throw InputError("message must be an object");
        Turn t;
        t.message_id = optional_int(m, "messageId");
        t.time_offset = optional_int(m, "timeOffset");
        t.speaker_id = int_field(m, "senderWorkerId");
        if (t.speaker_id == d.seeker_id) {
            t.role = Role::kSeeker;
        } else if (t.speaker_id == d.agent_id) {
            t.role = Role::kAgent;
        } else {
            throw InputError("message sender " + std::to_string(t.speaker_id) + " is neither participant");
        }
        auto text = m.find("text");
        if (text == m.end() || !text->is_string()) throw InputError("message field 'text' must be a string");
        t.text = text->get<std::string>();
        std::size_t missing = 0;
        t.mentions = find_mentions(t.text, d.mention_table, &missing);
        if (missing > 0) {
            if (unresolved) *unresolved += missing;
            if (warnings)
                warnings->push_back("dialogue " + d.dialogue_id + ": " + std::to_string(missing) +
                                    " unresolved mention marker(s) left as text");
        }
        d.turns.push_back(std::move(t));
    }
    return d;
}

ParseResult parse_redial(std::istream& in, const ParseOptions& options) {
    ParseResult result;
    for_each_line(in, options, result.warnings, result.malformed_lines, [&](const json& record) {
        Dialogue d = parse_dialogue(record, &result.warnings, &result.unresolved_mentions);
        for (const auto& [id, title] : d.mention_table) {
            result.catalog.try_emplace(id, Item{id, title.empty() ? id : title});
        }
        result.dialogues.push_back(std::move(d));
    });
    return result;
}

ParseResult parse_redial_file(const std::string& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read dialogue file: " + path);
    return parse_redial(in, options);
}

json to_redial_json(const Dialogue& d) {
    json messages = json::array();
    for (const auto& t : d.turns) {
        messages.push_back({{"messageId", t.message_id},
                            {"timeOffset", t.time_offset},
                            {"senderWorkerId", t.speaker_id},
                            {"text", t.text}});
    }
    json mentions = json::object();
    for (const auto& [id, title] : d.mention_table) mentions[id] = title;
    json out = {{"conversationId", d.dialogue_id},
                {"initiatorWorkerId", d.seeker_id},
                {"respondentWorkerId", d.agent_id},
                {"messages", std::move(messages)},
                {"movieMentions", std::move(mentions)},
                {"initiatorQuestions", questions_json(d.seeker_opinions)},
                {"respondentQuestions", questions_json(d.agent_opinions)}};
    if (d.synthetic) out["synthetic"] = true;
    if (d.target_item_id) out["target_item_id"] = *d.target_item_id;
    return out;
}

void write_redial(std::ostream& out, std::span<const Dialogue> dialogues) {
    for (const auto& d : dialogues) out << to_redial_json(d).dump() << '\n';
}

std::string render_turn(const Turn& turn, const std::map<ItemId, std::string>& table) {
    std::string out;
    std::size_t pos = 0;
    for (const auto& m : turn.mentions) {
        out.append(turn.text, pos, m.begin - pos);
        auto it = table.find(m.item_id);
        out += (it != table.end() && !it->second.empty()) ? it->second : m.item_id;
        pos = m.end;
    }
    out.append(turn.text, pos, std::string::npos);
    return out;
}

MetadataFile parse_metadata(std::istream& in, const ParseOptions& options) {
    MetadataFile out;
    std::size_t malformed = 0;
    for_each_line(in, options, out.warnings, malformed, [&](const json& r) {
        if (!r.is_object() || !r.contains("item_id")) throw InputError("metadata record needs 'item_id'");
        ItemMetadata md;
        md.item_id = id_string(r["item_id"], "item_id");
        auto text = [&](const char* f) {
            auto it = r.find(f);
            return it != r.end() && it->is_string() ? it->get<std::string>() : std::string();
        };
        std::string title = text("title");
        if (title.empty()) {
            out.warnings.push_back("metadata for " + md.item_id + " has no title; using its id");
            title = md.item_id;
        }
        md.plot = text("plot");
        md.director = text("director");
        if (auto it = r.find("actors"); it != r.end() && it->is_array()) {
            for (const auto& a : *it)
                if (a.is_string()) md.actors.push_back(a.get<std::string>());
        }
        out.items.try_emplace(md.item_id, Item{md.item_id, title});
        out.metadata.insert_or_assign(md.item_id, std::move(md));
    });
    return out;
}

MetadataFile parse_metadata_file(const std::string& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read metadata file: " + path);
    return parse_metadata(in, options);
}

json to_metadata_json(const Item& item, const ItemMetadata* md) {
    json j = {{"item_id", item.item_id}, {"title", item.title}};
    j["plot"] = md ? md->plot : "";
    j["director"] = md ? md->director : "";
    j["actors"] = md ? md->actors : std::vector<std::string>{};
    return j;
}

void merge_catalog(Catalog& into, const Catalog& from) {
    for (const auto& [id, item] : from) into.try_emplace(id, item);
}

std::vector<RecExample> extract_examples(const Dialogue& d, RecPolicy policy) {
    std::vector<RecExample> out;
    std::string context;
    std::vector<ItemId> context_items;
    std::set<ItemId> seeker_mentioned;

    for (std::size_t ti = 0; ti < d.turns.size(); ++ti) {
        const Turn& turn = d.turns[ti];
        if (turn.role == Role::kAgent && !turn.mentions.empty()) {
            std::vector<ItemId> targets;
            for (const auto& m : turn.mentions)
                if (std::find(targets.begin(), targets.end(), m.item_id) == targets.end()) targets.push_back(m.item_id);

            for (const auto& target : targets) {
                if (policy == RecPolicy::kFirstMentionOnly && seeker_mentioned.contains(target)) continue;
                std::string masked;
                std::size_t pos = 0;
                for (const auto& m : turn.mentions) {
                    masked.append(turn.text, pos, m.begin - pos);
                    if (m.item_id == target) {
                        masked += kRecToken;
                    } else {
                        const auto& title = d.mention_table.at(m.item_id);
                        masked += title.empty() ? m.item_id : title;
                    }
                    pos = m.end;
                }
                masked.append(turn.text, pos, std::string::npos);
                // A title typed out by hand is a mention too; it must not leak the label.
                const auto& gold_title = d.mention_table.at(target);
                masked = replace_all(std::move(masked), gold_title, kRecToken);

                RecExample ex;
                ex.example_id = d.dialogue_id + ":" + std::to_string(ti) + ":" + target;
                ex.dialogue_id = d.dialogue_id;
                ex.user_id = d.seeker_id;
                ex.query_text = context.empty() ? masked : context + " " + masked;
                ex.masked_offset = ex.query_text.size() - masked.size();
                ex.gold_item_id = target;
                ex.turn_index = ti;
                ex.context_items = context_items;
                ex.synthetic = d.synthetic;
                out.push_back(std::move(ex));
            }
        }

        if (ti > 0) context.push_back(' ');
        context += render_turn(turn, d.mention_table);
        for (const auto& m : turn.mentions) {
            if (std::find(context_items.begin(), context_items.end(), m.item_id) == context_items.end())
                context_items.push_back(m.item_id);
            if (turn.role == Role::kSeeker) seeker_mentioned.insert(m.item_id);
        }
    }
    return out;
}

std::vector<RecExample> extract_all(std::span<const Dialogue> dialogues, RecPolicy policy) {
    std::vector<RecExample> out;
    for (const auto& d : dialogues) {
        auto ex = extract_examples(d, policy);
        out.insert(out.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
    }
    return out;
}

std::set<ItemId> liked_items(const Dialogue& d, Role role) {
    std::set<ItemId> out;
    const auto& opinions = role == Role::kSeeker ? d.seeker_opinions : d.agent_opinions;
    if (!opinions.empty()) {
        for (const auto& [id, op] : opinions)
            if (op.liked == Liked::kLiked) out.insert(id);
        return out;
    }
    for (const auto& t : d.turns) {
        if (t.role != role) continue;
        for (const auto& m : t.mentions) out.insert(m.item_id);
    }
    return out;
}

std::set<ItemId> query_liked(const Dialogue& d, const RecExample& example) {
    const auto liked = liked_items(d, Role::kSeeker);
    std::set<ItemId> out;
    for (const auto& id : example.context_items)
        if (liked.contains(id)) out.insert(id);
    return out;
}

json to_json(const RecExample& e) {
    return {{"example_id", e.example_id},     {"dialogue_id", e.dialogue_id}, {"user_id", e.user_id},
            {"query_text", e.query_text},     {"masked_offset", e.masked_offset},
            {"gold_item_id", e.gold_item_id}, {"turn_index", e.turn_index},
            {"context_items", e.context_items}, {"synthetic", e.synthetic}};
}

RecExample example_from_json(const json& j) {
    RecExample e;
    e.example_id = j.at("example_id").get<std::string>();
    e.dialogue_id = j.at("dialogue_id").get<std::string>();
    e.user_id = j.at("user_id").get<UserId>();
    e.query_text = j.at("query_text").get<std::string>();
    e.masked_offset = j.at("masked_offset").get<std::size_t>();
    e.gold_item_id = j.at("gold_item_id").get<std::string>();
    e.turn_index = j.at("turn_index").get<std::size_t>();
    e.context_items = j.at("context_items").get<std::vector<ItemId>>();
    e.synthetic = j.value("synthetic", false);
    return e;
}

}  // namespace crs::corpus
