#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/augment.hpp"
#include "crs/bm25.hpp"
#include "crs/userselect.hpp"

namespace crs::app {

/// Tunables shared by the CLI and the service. Defaults are the published
/// configuration: k1=1.6, b=0.7, M=5, lambda=0.05, threshold 10, 20 dialogues, 6 exemplars.
struct Settings {
    bm25::Params bm25{};
    users::FusionConfig fusion{};
    augment::AugmentConfig augment{};
    std::size_t threads = 1;
};

/// Setting keys, as used in config files; the environment variable is
/// CRS_<KEY uppercased>: k1, b, idf, m, lambda, similarity, seed, threshold,
/// max_per_item, fewshot, threads. Flags spell m as --M and '_' as '-'.
const std::vector<std::string>& setting_keys();

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
EnvLookup process_env();

/// flags > environment > config file > defaults. Values are validated;
/// bad ones raise InputError naming their source.
Settings resolve_settings(const nlohmann::json& config_file, const EnvLookup& env,
                          const std::map<std::string, std::string>& flags);

}  // namespace crs::app
