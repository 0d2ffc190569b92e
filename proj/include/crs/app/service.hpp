#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/app/artifacts.hpp"
#include "crs/app/settings.hpp"

namespace httplib {
class Server;
}

namespace crs::app {

/// Builds the live query for a list of turns: `@id` markers become titles,
/// turns are space-joined, and a trailing `[REC]` stands for the reply.
std::string session_query(const std::vector<std::pair<corpus::Role, std::string>>& turns,
                          const corpus::Catalog& catalog);

/// Seeker-mentioned catalog items in `turns` (the liked fallback when none were marked).
std::set<corpus::ItemId> seeker_mentions(const std::vector<std::pair<corpus::Role, std::string>>& turns,
                                         const corpus::Catalog& catalog);

/// Error carrying an HTTP status.
struct ServiceError : std::runtime_error {
    ServiceError(int status, const std::string& message) : std::runtime_error(message), status(status) {}
    int status;
};

/// Session store plus the recommend logic behind the HTTP routes. Engine
/// snapshots are immutable and replaced wholesale; sessions lock individually.
class Service {
public:
    Service(std::shared_ptr<const Engine> engine, Settings settings,
            std::optional<std::filesystem::path> index_dir = std::nullopt);

    std::shared_ptr<const Engine> snapshot() const;
    void replace_snapshot(std::shared_ptr<const Engine> engine);
    /// Reloads from the index directory when its CURRENT pointer moved. Returns true on reload.
    bool reload_if_changed();

    std::string create_session();
    void add_turn(const std::string& session_id, const std::string& role, const std::string& text);
    void mark_liked(const std::string& session_id, const corpus::ItemId& item_id);
    nlohmann::json recommend(const std::string& session_id, std::size_t k, bool user_select) const;
    nlohmann::json item(const corpus::ItemId& item_id) const;
    /// Registers a new item on a copy of the live engine, persists it when an
    /// index directory is attached, then swaps it in.
    nlohmann::json add_item(const nlohmann::json& body);

    /// Registers all routes on `server`.
    void mount(httplib::Server& server);

private:
    struct Session {
        mutable std::mutex mu;
        std::vector<std::pair<corpus::Role, std::string>> turns;
        std::set<corpus::ItemId> liked;
    };
    std::shared_ptr<Session> find_session(const std::string& id) const;

    Settings settings_;
    std::optional<std::filesystem::path> index_dir_;
    std::string loaded_snapshot_;

    mutable std::mutex engine_mu_;
    std::shared_ptr<const Engine> engine_;
    std::mutex write_mu_;  // serializes add_item and reloads

    mutable std::shared_mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::size_t next_session_ = 1;
};

}  // namespace crs::app
