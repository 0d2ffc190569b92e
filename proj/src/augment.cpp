#include "crs/augment.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "crs/errors.hpp"
#include "crs/textnorm.hpp"

namespace crs::augment {
namespace {

std::string lower_ascii(std::string s) {
    for (auto& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// "Frozen (2013)" -> "Frozen"; titles without a trailing year are returned unchanged.
std::string strip_year(const std::string& title) {
    const auto open = title.rfind(" (");
    if (open == std::string::npos || title.back() != ')') return title;
    const auto inner = std::string_view(title).substr(open + 2, title.size() - open - 3);
    return all_digits(inner) ? title.substr(0, open) : title;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct RoleLine {
    bool matched = false;
    corpus::Role role = corpus::Role::kSeeker;
    std::string text;
};

RoleLine match_role(const std::string& line) {
    static const std::pair<std::string_view, corpus::Role> kTags[] = {
        {"seeker:", corpus::Role::kSeeker},
        {"user:", corpus::Role::kSeeker},
        {"agent:", corpus::Role::kAgent},
        {"recommender:", corpus::Role::kAgent},
    };
    const auto lower = lower_ascii(line);
    for (const auto& [tag, role] : kTags) {
        if (lower.starts_with(tag)) return {true, role, trim(std::string_view(line).substr(tag.size()))};
    }
    return {};
}

bool is_word(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'); }

// Replaces case-insensitive, whole-word occurrences of `needle` in `text` by `marker`.
std::size_t replace_ci(std::string& text, const std::string& needle, const std::string& marker) {
    if (needle.empty()) return 0;
    const auto lneedle = lower_ascii(needle);
    std::size_t count = 0;
    std::size_t pos = 0;
    while (true) {
        const auto lower = lower_ascii(text);
        pos = lower.find(lneedle, pos);
        if (pos == std::string::npos) break;
        const std::size_t end = pos + needle.size();
        const bool bounded = (pos == 0 || ((!is_word(text[pos - 1]) || !is_word(needle.front())) &&
                                           text[pos - 1] != '@')) &&
                             (end == text.size() || !is_word(text[end]) || !is_word(needle.back()));
        if (!bounded) {
            ++pos;
            continue;
        }
        text.replace(pos, needle.size(), marker);
        pos += marker.size();
        ++count;
    }
    return count;
}

}  // namespace

std::vector<std::string> split_candidates(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    std::string current;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
            continue;
        }
        if (!line.empty() && line.back() == '\r') line.pop_back();
        current += line;
        current.push_back('\n');
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::vector<std::string> ReplayGenerator::generate(const GenerationRequest& request) {
    {
        std::lock_guard lock(mu_);
        requests_.push_back(request);
    }
    std::ifstream in(dir_ / (request.item_id + ".txt"));
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    auto out = split_candidates(ss.str());
    if (out.size() > request.count) out.resize(request.count);
    return out;
}

std::set<corpus::ItemId> select_cold_items(std::span<const corpus::RecExample> train_examples,
                                           const corpus::Catalog& catalog, std::size_t threshold) {
    std::map<corpus::ItemId, std::size_t> counts;
    for (const auto& [id, _] : catalog) counts[id] = 0;
    for (const auto& ex : train_examples) {
        if (!ex.synthetic) ++counts[ex.gold_item_id];
    }
    std::set<corpus::ItemId> out;
    for (const auto& [id, n] : counts)
        if (n <= threshold) out.insert(id);
    return out;
}

std::mt19937_64 item_rng(const AugmentConfig& config, const corpus::ItemId& item_id) {
    const std::uint64_t mix = config.fixed_exemplars ? 0 : fnv1a(item_id);
    return std::mt19937_64(splitmix64(config.seed ^ mix));
}

std::string serialize_exemplar(const corpus::Dialogue& d) {
    std::string out;
    for (const auto& t : d.turns) {
        auto text = corpus::render_turn(t, d.mention_table);
        std::replace(text.begin(), text.end(), '\n', ' ');
        out += t.role == corpus::Role::kSeeker ? "SEEKER: " : "AGENT: ";
        out += trim(text);
        out.push_back('\n');
    }
    return out;
}

std::string build_fewshot_prompt(std::span<const corpus::Dialogue> train_dialogues, const corpus::Item& target,
                                 const corpus::ItemMetadata* metadata, const AugmentConfig& config,
                                 std::mt19937_64& rng, std::vector<std::string>* notes) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < train_dialogues.size(); ++i)
        if (!train_dialogues[i].synthetic) pool.push_back(i);
    if (config.fewshot_count > pool.size() && notes) {
        notes->push_back("few-shot pool for " + target.item_id + " has " + std::to_string(pool.size()) +
                         " dialogue(s), fewer than the requested " + std::to_string(config.fewshot_count));
    }
    std::vector<std::size_t> chosen;
    std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), config.fewshot_count, rng);

    std::ostringstream out;
    if (!chosen.empty()) {
        out << "Here are example conversations in which a SEEKER asks for recommendations and an AGENT "
               "recommends items.\n\n";
        for (auto i : chosen) out << serialize_exemplar(train_dialogues[i]) << '\n';
    }
    out << "Write " << config.max_dialogues_per_item
        << " new conversations in the same format, one line per turn starting with SEEKER: or AGENT:, "
           "with a blank line between conversations. In every conversation the AGENT must recommend \""
        << target.title << "\" by name.\n";
    out << "Item: " << target.title << '\n';
    if (metadata) {
        if (!metadata->plot.empty()) out << "Plot: " << metadata->plot << '\n';
        if (!metadata->director.empty()) out << "Director: " << metadata->director << '\n';
        if (!metadata->actors.empty()) {
            out << "Actors: ";
            for (std::size_t i = 0; i < metadata->actors.size(); ++i) out << (i ? ", " : "") << metadata->actors[i];
            out << '\n';
        }
    }
    return out.str();
}

ParsedGeneration parse_generated(std::span<const std::string> raw, const corpus::Item& target,
                                 std::size_t first_index) {
    ParsedGeneration out;
    if (!all_digits(target.item_id)) {
        out.warnings.push_back("item id " + target.item_id + " cannot be written as an @<digits> mention");
        return out;
    }
    const std::string marker = "@" + target.item_id;
    const std::string full = target.title;
    const std::string short_title = strip_year(full);

    std::size_t next = first_index;
    for (std::size_t r = 0; r < raw.size(); ++r) {
        std::vector<std::pair<corpus::Role, std::string>> turns;
        std::istringstream in(raw[r]);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto tagged = match_role(line);
            if (tagged.matched) {
                turns.emplace_back(tagged.role, std::move(tagged.text));
            } else if (!turns.empty()) {
                turns.back().second += " " + trim(line);
            }
        }
        const bool has_agent = std::any_of(turns.begin(), turns.end(),
                                           [](const auto& t) { return t.first == corpus::Role::kAgent; });
        if (turns.empty() || !has_agent) {
            out.warnings.push_back("generation " + std::to_string(r) + " for " + target.item_id +
                                   " is not a SEEKER/AGENT dialogue; skipped");
            continue;
        }

        corpus::Dialogue d;
        d.dialogue_id = "synthetic-" + target.item_id + "-" + std::to_string(next);
        d.seeker_id = corpus::kSyntheticUser;
        d.agent_id = kSyntheticAgent;
        d.synthetic = true;
        d.target_item_id = target.item_id;
        d.mention_table.emplace(target.item_id, target.title);
        bool agent_names_target = false;
        for (std::size_t i = 0; i < turns.size(); ++i) {
            auto& [role, text] = turns[i];
            std::size_t hits = replace_ci(text, full, marker);
            if (short_title != full) hits += replace_ci(text, short_title, marker);
            if (role == corpus::Role::kAgent && hits > 0) agent_names_target = true;
            corpus::Turn t;
            t.role = role;
            t.speaker_id = role == corpus::Role::kSeeker ? d.seeker_id : d.agent_id;
            t.message_id = static_cast<std::int64_t>(i);
            t.text = std::move(text);
            t.mentions = corpus::find_mentions(t.text, d.mention_table);
            d.turns.push_back(std::move(t));
        }
        if (!agent_names_target) {
            ++out.discarded;
            continue;
        }
        ++next;
        out.dialogues.push_back(std::move(d));
    }
    return out;
}

std::vector<corpus::RecExample> merge(std::span<const corpus::RecExample> train_examples,
                                      std::span<const corpus::Dialogue> synthetic_dialogues,
                                      const AugmentConfig& config, std::vector<std::string>* notes) {
    std::vector<corpus::RecExample> out(train_examples.begin(), train_examples.end());
    std::set<std::string> merged_dialogues;
    std::map<corpus::ItemId, std::size_t> per_item;
    for (const auto& ex : out) {
        if (ex.synthetic && merged_dialogues.insert(ex.dialogue_id).second) ++per_item[ex.gold_item_id];
    }

    std::map<corpus::ItemId, std::size_t> over_cap;
    for (const auto& d : synthetic_dialogues) {
        if (!d.synthetic || !d.target_item_id) {
            if (notes) notes->push_back("dialogue " + d.dialogue_id + " is not tagged synthetic; not merged");
            continue;
        }
        if (merged_dialogues.contains(d.dialogue_id)) continue;
        const auto& target = *d.target_item_id;
        if (per_item[target] >= config.max_dialogues_per_item) {
            ++over_cap[target];
            continue;
        }
        auto examples = corpus::extract_examples(d);
        auto it = std::find_if(examples.begin(), examples.end(),
                               [&](const corpus::RecExample& e) { return e.gold_item_id == target; });
        if (it == examples.end()) {
            if (notes) notes->push_back("synthetic dialogue " + d.dialogue_id + " never recommends its target");
            continue;
        }
        it->synthetic = true;
        out.push_back(std::move(*it));
        merged_dialogues.insert(d.dialogue_id);
        ++per_item[target];
    }
    if (notes) {
        for (const auto& [item, n] : over_cap)
            notes->push_back(std::to_string(n) + " synthetic dialogue(s) for " + item + " over the cap");
    }
    return out;
}

AugmentationRun run_augmentation(std::span<const corpus::Dialogue> train_dialogues,
                                 std::span<const corpus::RecExample> train_examples,
                                 const corpus::Catalog& catalog, const corpus::MetadataTable& metadata,
                                 GeneratorClient& generator, const AugmentConfig& config) {
    AugmentationRun run;
    run.cold_items = select_cold_items(train_examples, catalog, config.frequency_threshold);
    if (config.max_dialogues_per_item == 0) return run;

    for (const auto& item_id : run.cold_items) {
        const auto& item = catalog.at(item_id);
        auto md = metadata.find(item_id);
        auto rng = item_rng(config, item_id);
        GenerationRequest req{item_id,
                              build_fewshot_prompt(train_dialogues, item, md == metadata.end() ? nullptr : &md->second,
                                                   config, rng, &run.warnings),
                              config.max_dialogues_per_item};
        ++run.requested;
        std::vector<std::string> raw;
        try {
            raw = generator.generate(req);
        } catch (const std::exception& e) {
            run.warnings.push_back("generation failed for " + item_id + ": " + e.what());
            continue;
        }
        if (raw.size() > config.max_dialogues_per_item) raw.resize(config.max_dialogues_per_item);
        auto parsed = parse_generated(raw, item);
        run.discarded += parsed.discarded;
        run.warnings.insert(run.warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
        if (parsed.dialogues.size() < config.max_dialogues_per_item) {
            run.warnings.push_back(item_id + ": " + std::to_string(parsed.dialogues.size()) + " of " +
                                   std::to_string(config.max_dialogues_per_item) + " usable dialogues");
        }
        for (auto& d : parsed.dialogues) run.dialogues.push_back(std::move(d));
    }
    return run;
}

}  // namespace crs::augment
