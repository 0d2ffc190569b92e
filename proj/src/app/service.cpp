#include "crs/app/service.hpp"

#include <chrono>

#include <httplib.h>

#include "crs/errors.hpp"

namespace crs::app {
using nlohmann::json;

namespace {

constexpr std::size_t kMaxK = 1000;

std::string render_markers(const std::string& text, const corpus::Catalog& catalog,
                           std::set<corpus::ItemId>* mentioned = nullptr) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '@') {
            std::size_t j = i + 1;
            while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
            if (j > i + 1) {
                auto it = catalog.find(text.substr(i + 1, j - i - 1));
                if (it != catalog.end()) {
                    out += it->second.title;
                    if (mentioned) mentioned->insert(it->first);
                    i = j;
                    continue;
                }
            }
        }
        out.push_back(text[i++]);
    }
    return out;
}

json parse_body(const httplib::Request& req, bool allow_empty) {
    if (req.body.empty() && allow_empty) return json::object();
    json body;
    try {
        body = json::parse(req.body);
    } catch (const json::exception&) {
        throw ServiceError(400, "body is not valid JSON");
    }
    if (!body.is_object()) throw ServiceError(400, "body must be a JSON object");
    return body;
}

std::string string_field(const json& body, const char* name) {
    auto it = body.find(name);
    if (it == body.end() || !it->is_string()) throw ServiceError(400, std::string("'") + name + "' must be a string");
    return it->get<std::string>();
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const ServiceError& e) {
            reply(res, e.status, {{"error", e.what()}});
        } catch (const InputError& e) {
            reply(res, 400, {{"error", e.what()}});
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", e.what()}});
        }
    };
}

}  // namespace

std::string session_query(const std::vector<std::pair<corpus::Role, std::string>>& turns,
                          const corpus::Catalog& catalog) {
    std::string q;
    for (const auto& [role, text] : turns) {
        q += render_markers(text, catalog);
        q.push_back(' ');
    }
    q += kRecToken;
    return q;
}

std::set<corpus::ItemId> seeker_mentions(const std::vector<std::pair<corpus::Role, std::string>>& turns,
                                         const corpus::Catalog& catalog) {
    std::set<corpus::ItemId> out;
    for (const auto& [role, text] : turns)
        if (role == corpus::Role::kSeeker) render_markers(text, catalog, &out);
    return out;
}

Service::Service(std::shared_ptr<const Engine> engine, Settings settings, std::optional<std::filesystem::path> index_dir)
    : settings_(std::move(settings)), index_dir_(std::move(index_dir)), engine_(std::move(engine)) {
    if (!engine_) throw std::invalid_argument("Service needs an engine");
    if (index_dir_) loaded_snapshot_ = current_snapshot(*index_dir_).filename().string();
}

std::shared_ptr<const Engine> Service::snapshot() const {
    std::lock_guard lock(engine_mu_);
    return engine_;
}

void Service::replace_snapshot(std::shared_ptr<const Engine> engine) {
    std::lock_guard lock(engine_mu_);
    engine_ = std::move(engine);
}

bool Service::reload_if_changed() {
    if (!index_dir_) return false;
    std::lock_guard write(write_mu_);
    const auto name = current_snapshot(*index_dir_).filename().string();
    if (name == loaded_snapshot_) return false;
    replace_snapshot(std::make_shared<const Engine>(load_engine(*index_dir_)));
    loaded_snapshot_ = name;
    return true;
}

std::string Service::create_session() {
    std::unique_lock lock(sessions_mu_);
    const auto id = std::to_string(next_session_++);
    sessions_.emplace(id, std::make_shared<Session>());
    return id;
}

std::shared_ptr<Service::Session> Service::find_session(const std::string& id) const {
    std::shared_lock lock(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
    return it->second;
}

void Service::add_turn(const std::string& session_id, const std::string& role, const std::string& text) {
    corpus::Role r;
    if (role == "seeker")
        r = corpus::Role::kSeeker;
    else if (role == "agent")
        r = corpus::Role::kAgent;
    else
        throw ServiceError(400, "role must be 'seeker' or 'agent'");
    auto session = find_session(session_id);
    std::lock_guard lock(session->mu);
    session->turns.emplace_back(r, text);
}

void Service::mark_liked(const std::string& session_id, const corpus::ItemId& item_id) {
    auto session = find_session(session_id);
    if (!snapshot()->items.catalog().contains(item_id)) throw ServiceError(404, "unknown item " + item_id);
    std::lock_guard lock(session->mu);
    session->liked.insert(item_id);
}

json Service::recommend(const std::string& session_id, std::size_t k, bool user_select) const {
    if (k == 0 || k > kMaxK) throw ServiceError(400, "k must be in [1, " + std::to_string(kMaxK) + "]");
    auto session = find_session(session_id);
    std::vector<std::pair<corpus::Role, std::string>> turns;
    std::set<corpus::ItemId> liked;
    {
        std::lock_guard lock(session->mu);
        turns = session->turns;
        liked = session->liked;
    }
    const auto engine = snapshot();
    const auto& items = engine->items;
    const auto query = items.tokenize(session_query(turns, items.catalog()));

    bm25::RankedList ranked;
    if (user_select) {
        if (liked.empty()) liked = seeker_mentions(turns, items.catalog());
        ranked = users::fused_search(items.index(), *engine->profiles, query, liked, settings_.fusion, k);
    } else {
        ranked = items.index().search(query, k);
    }

    json out_items = json::array();
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& title = items.catalog().at(ranked[i].doc_ref).title;
        out_items.push_back(
            {{"item_id", ranked[i].doc_ref}, {"title", title}, {"score", ranked[i].score}, {"rank", i + 1}});
    }
    return {{"items", std::move(out_items)}, {"user_select", user_select}};
}

json Service::item(const corpus::ItemId& item_id) const {
    const auto engine = snapshot();
    const auto& catalog = engine->items.catalog();
    auto it = catalog.find(item_id);
    if (it == catalog.end()) throw ServiceError(404, "unknown item " + item_id);
    auto md = engine->items.metadata().find(item_id);
    return corpus::to_metadata_json(it->second, md == engine->items.metadata().end() ? nullptr : &md->second);
}

json Service::add_item(const json& body) {
    const auto start = std::chrono::steady_clock::now();
    corpus::Item item{string_field(body, "item_id"), string_field(body, "title")};
    corpus::ItemMetadata md{item.item_id, {}, {}, {}};
    if (body.contains("plot")) md.plot = string_field(body, "plot");
    if (body.contains("director")) md.director = string_field(body, "director");
    std::vector<std::string> contexts;
    try {
        if (body.contains("actors")) md.actors = body.at("actors").get<std::vector<std::string>>();
        if (body.contains("contexts")) contexts = body.at("contexts").get<std::vector<std::string>>();
    } catch (const json::exception&) {
        throw ServiceError(400, "'actors' and 'contexts' must be arrays of strings");
    }
    const bool has_md = !md.plot.empty() || !md.director.empty() || !md.actors.empty();

    std::lock_guard write(write_mu_);
    auto next = std::make_shared<Engine>(*snapshot());
    try {
        next->items.register_new_item(item, has_md ? &md : nullptr, std::move(contexts));
    } catch (const InputError& e) {
        throw ServiceError(409, e.what());
    }
    if (index_dir_) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        loaded_snapshot_ = write_snapshot(*index_dir_, *next, secs).filename().string();
    }
    replace_snapshot(std::move(next));
    return this->item(item.item_id);
}

void Service::mount(httplib::Server& server) {
    server.Get("/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
                   reply(res, 200, {{"status", "ok"}});
               }));
    server.Post("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
                    reply(res, 201, {{"session_id", create_session()}});
                }));
    server.Post(R"(/sessions/([^/]+)/turns)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    const auto body = parse_body(req, false);
                    const auto id = req.matches[1].str();
                    find_session(id);
                    add_turn(id, string_field(body, "role"), string_field(body, "text"));
                    reply(res, 200, {{"session_id", id}});
                }));
    server.Post(R"(/sessions/([^/]+)/liked)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    const auto body = parse_body(req, false);
                    const auto id = req.matches[1].str();
                    find_session(id);
                    mark_liked(id, string_field(body, "item_id"));
                    reply(res, 200, {{"session_id", id}});
                }));
    server.Post(R"(/sessions/([^/]+)/recommend)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                    const auto body = parse_body(req, true);
                    std::size_t k = 10;
                    bool user_select = false;
                    if (auto it = body.find("k"); it != body.end()) {
                        if (!it->is_number_integer() || it->get<std::int64_t>() < 1)
                            throw ServiceError(400, "'k' must be a positive integer");
                        k = it->get<std::size_t>();
                    }
                    if (auto it = body.find("user_select"); it != body.end()) {
                        if (!it->is_boolean()) throw ServiceError(400, "'user_select' must be a boolean");
                        user_select = it->get<bool>();
                    }
                    reply(res, 200, recommend(req.matches[1].str(), k, user_select));
                }));
    server.Get(R"(/items/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   reply(res, 200, item(req.matches[1].str()));
               }));
    server.Post("/items", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    reply(res, 201, add_item(parse_body(req, false)));
                }));
}

}  // namespace crs::app
