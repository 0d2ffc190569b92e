#pragma once

// Generates ReDial-shaped records: agent turns with one to three mentions,
// repeated mentions, titles typed out in plain text, seeker mentions and
// questionnaires on roughly half the dialogues.

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace crs::testing {

struct SynthCorpus {
    std::vector<nlohmann::json> dialogues;
    std::vector<nlohmann::json> metadata;
    std::vector<std::string> titles;  // index i is item id (1000 + i)
};

inline const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> w{"i",     "like",   "movies", "really", "want",  "something", "funny",
                                            "scary", "about",  "with",   "a",      "the",   "good",      "great",
                                            "seen",  "watch",  "maybe",  "love",   "space", "family",    "crime",
                                            "drama", "action", "music",  "war",    "dogs",  "old",       "new"};
    return w;
}

inline std::string synth_item_id(std::size_t i) { return std::to_string(1000 + i); }

inline SynthCorpus synth_redial(std::uint64_t seed, std::size_t n_dialogues, std::size_t n_items = 60,
                                std::size_t n_users = 40) {
    std::mt19937_64 rng(seed);
    const auto& words = filler_words();
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    auto chance = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };

    SynthCorpus out;
    for (std::size_t i = 0; i < n_items; ++i) {
        std::string title;
        const auto n = 1 + pick(3);
        for (std::size_t j = 0; j < n; ++j) {
            std::string w = words[pick(words.size())];
            w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
            title += (j ? " " : "") + w;
        }
        title += " (" + std::to_string(1950 + pick(70)) + ")";
        out.titles.push_back(title);
        out.metadata.push_back({{"item_id", synth_item_id(i)},
                                {"title", title},
                                {"plot", "a story about " + words[pick(words.size())] + " and " + words[pick(words.size())]},
                                {"director", "director" + std::to_string(i % 17)},
                                {"actors", {"actor" + std::to_string(i % 23), "actor" + std::to_string(i % 31)}}});
    }

    auto filler = [&](std::size_t n) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[pick(words.size())];
        return s;
    };

    for (std::size_t d = 0; d < n_dialogues; ++d) {
        const std::int64_t seeker = static_cast<std::int64_t>(pick(n_users));
        const std::int64_t agent = static_cast<std::int64_t>(n_users + pick(n_users));
        nlohmann::json mentions = nlohmann::json::object();
        nlohmann::json messages = nlohmann::json::array();
        const auto n_turns = 2 + pick(7);
        for (std::size_t t = 0; t < n_turns; ++t) {
            const bool is_agent = t % 2 == 1;
            std::string text = filler(1 + pick(8));
            std::size_t n_mentions = is_agent ? 1 + pick(3) : (chance(0.4) ? 1 : 0);
            for (std::size_t m = 0; m < n_mentions; ++m) {
                const auto item = pick(n_items);
                const auto id = synth_item_id(item);
                mentions[id] = out.titles[item];
                text += " @" + id;
                if (chance(0.2)) text += " or @" + id;               // repeated mention
                if (is_agent && chance(0.15)) text += " " + out.titles[item];  // typed title
                text += " " + filler(pick(4));
            }
            messages.push_back({{"messageId", d * 100 + t},
                                {"timeOffset", t * 7},
                                {"senderWorkerId", is_agent ? agent : seeker},
                                {"text", text}});
        }
        nlohmann::json questions = nlohmann::json::array();
        if (chance(0.5)) {
            questions = nlohmann::json::object();
            for (const auto& [id, title] : mentions.items())
                questions[id] = {{"suggested", pick(2)}, {"seen", pick(3)}, {"liked", pick(3)}};
        }
        out.dialogues.push_back({{"conversationId", std::to_string(20000 + d)},
                                 {"initiatorWorkerId", seeker},
                                 {"respondentWorkerId", agent},
                                 {"messages", messages},
                                 {"movieMentions", mentions},
                                 {"initiatorQuestions", questions},
                                 {"respondentQuestions", nlohmann::json::array()}});
    }
    return out;
}

inline std::string to_jsonl(const std::vector<nlohmann::json>& rows) {
    std::ostringstream out;
    for (const auto& r : rows) out << r.dump() << '\n';
    return out.str();
}

}  // namespace crs::testing
