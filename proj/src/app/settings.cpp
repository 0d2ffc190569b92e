#include "crs/app/settings.hpp"

#include <cstdlib>

#include "crs/errors.hpp"

namespace crs::app {
namespace {

double to_double(const std::string& v) {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return d;
}

std::size_t to_count(const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("expected a non-negative integer");
    return static_cast<std::size_t>(std::stoull(v));
}

void apply(Settings& s, const std::string& key, const std::string& value) {
    if (key == "k1") {
        s.bm25.k1 = to_double(value);
    } else if (key == "b") {
        s.bm25.b = to_double(value);
    } else if (key == "idf") {
        if (value == "non_negative")
            s.bm25.idf = bm25::IdfVariant::kNonNegative;
        else if (value == "robertson")
            s.bm25.idf = bm25::IdfVariant::kRobertson;
        else
            throw std::invalid_argument("expected non_negative or robertson");
    } else if (key == "m") {
        s.fusion.num_users = to_count(value);
    } else if (key == "lambda") {
        s.fusion.lambda = to_double(value);
    } else if (key == "similarity") {
        if (value == "jaccard")
            s.fusion.similarity = users::Similarity::kJaccard;
        else if (value == "overlap")
            s.fusion.similarity = users::Similarity::kOverlap;
        else
            throw std::invalid_argument("expected jaccard or overlap");
    } else if (key == "seed") {
        s.augment.seed = to_count(value);
    } else if (key == "threshold") {
        s.augment.frequency_threshold = to_count(value);
    } else if (key == "max_per_item") {
        s.augment.max_dialogues_per_item = to_count(value);
    } else if (key == "fewshot") {
        s.augment.fewshot_count = to_count(value);
    } else if (key == "threads") {
        s.threads = std::max<std::size_t>(1, to_count(value));
    } else {
        throw std::invalid_argument("unknown setting");
    }
}

std::string json_scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number()) return v.dump();
    throw std::invalid_argument("expected a string or number");
}

}  // namespace

const std::vector<std::string>& setting_keys() {
    static const std::vector<std::string> keys{"k1",   "b",         "idf",          "m",       "lambda", "similarity",
                                               "seed", "threshold", "max_per_item", "fewshot", "threads"};
    return keys;
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (v == nullptr || *v == '\0') return std::nullopt;
        return std::string(v);
    };
}

Settings resolve_settings(const nlohmann::json& config_file, const EnvLookup& env,
                          const std::map<std::string, std::string>& flags) {
    Settings s;
    auto set = [&](const std::string& key, const std::string& value, const std::string& source) {
        try {
            apply(s, key, value);
        } catch (const std::exception& e) {
            throw InputError("invalid " + key + " '" + value + "' from " + source + ": " + e.what());
        }
    };

    if (config_file.is_object()) {
        for (const auto& [key, value] : config_file.items()) {
            std::string text;
            try {
                text = json_scalar(value);
            } catch (const std::exception& e) {
                throw InputError("config file key '" + key + "': " + e.what());
            }
            set(key, text, "config file");
        }
    } else if (!config_file.is_null()) {
        throw InputError("config file must hold a JSON object");
    }
    for (const auto& key : setting_keys()) {
        std::string name = "CRS_" + key;
        for (auto& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (auto v = env(name)) set(key, *v, "environment " + name);
    }
    for (const auto& [key, value] : flags) set(key, value, "flag --" + key);

    try {
        s.bm25.validate();
        s.fusion.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    return s;
}

}  // namespace crs::app
