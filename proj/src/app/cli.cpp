#include "crs/app/cli.hpp"

#include <chrono>
#include <condition_variable>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "crs/app/artifacts.hpp"
#include "crs/app/service.hpp"
#include "crs/app/settings.hpp"
#include "crs/augment.hpp"
#include "crs/errors.hpp"
#include "crs/evalharness.hpp"

namespace crs::app {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Setting key, flag spelling, help text.
struct SettingFlag {
    const char* key;
    const char* flag;
    const char* help;
};
const std::vector<SettingFlag> kSettingFlags{
    {"k1", "--k1", "BM25 term-frequency saturation (default 1.6)"},
    {"b", "--b", "BM25 length normalization in [0, 1] (default 0.7)"},
    {"idf", "--idf", "non_negative | robertson"},
    {"m", "--M", "Number of similar users to fuse (default 5)"},
    {"lambda", "--lambda", "Weight of the similar-user scores (default 0.05)"},
    {"similarity", "--similarity", "jaccard | overlap"},
    {"seed", "--seed", "Seed for exemplar sampling"},
    {"threshold", "--threshold", "Items with at most this many training examples are cold (default 10)"},
    {"max_per_item", "--max-per-item", "Synthetic dialogues per cold item (default 20)"},
    {"fewshot", "--fewshot", "Exemplar dialogues per prompt (default 6)"},
    {"threads", "--threads", "Evaluation threads (default 1)"}};

struct SettingFlags {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config_path;

    void attach(CLI::App& cmd, const std::vector<std::string>& keys) {
        cmd.add_option("--config", config_path, "JSON file with setting defaults");
        for (const auto& f : kSettingFlags) {
            if (std::find(keys.begin(), keys.end(), f.key) == keys.end()) continue;
            options[f.key] = cmd.add_option(f.flag, values[f.key], f.help);
        }
    }

    Settings resolve() const {
        json config;
        if (!config_path.empty()) {
            try {
                config = json::parse(read_file(config_path));
            } catch (const json::exception& e) {
                throw InputError("config file " + config_path + ": " + e.what());
            }
        }
        std::map<std::string, std::string> flags;
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) flags[key] = values.at(key);
        return resolve_settings(config, process_env(), flags);
    }
};

const std::vector<std::string> kBuildKeys{"k1", "b", "idf", "max_per_item"};
const std::vector<std::string> kEvalKeys{"m", "lambda", "similarity", "threads", "seed", "max_per_item"};
const std::vector<std::string> kAugmentKeys{"seed", "threshold", "max_per_item", "fewshot"};

std::vector<std::size_t> parse_counts(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
            throw InputError(std::string("bad ") + what + " list '" + text + "'");
        out.push_back(std::stoull(part));
    }
    if (out.empty()) throw InputError(std::string("empty ") + what + " list");
    return out;
}

corpus::ParseResult read_dialogues(const std::string& path, bool strict, std::ostream& err) {
    auto parsed = corpus::parse_redial_file(path, corpus::ParseOptions{strict});
    if (parsed.malformed_lines > 0)
        err << "warning: " << path << ": skipped " << parsed.malformed_lines << " malformed line(s)\n";
    if (parsed.unresolved_mentions > 0)
        err << "warning: " << path << ": " << parsed.unresolved_mentions << " unresolved mention marker(s)\n";
    return parsed;
}

void report_warnings(const std::vector<std::string>& warnings, bool verbose, std::ostream& err) {
    if (warnings.empty()) return;
    if (verbose) {
        for (const auto& w : warnings) err << "warning: " << w << '\n';
    } else {
        err << "warning: " << warnings.size() << " warning(s); rerun with --verbose to list them\n";
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

const char* similarity_name(users::Similarity s) { return s == users::Similarity::kOverlap ? "overlap" : "jaccard"; }

// ---- build -------------------------------------------------------------

struct BuildArgs {
    std::string train, metadata, mode = "full", out, augmented, policy = "all_agent_mentions", stopwords;
    bool include_synthetic_users = false, strict = false, verbose = false;
    SettingFlags settings;
};

int cmd_build(const BuildArgs& a, std::ostream& out, std::ostream& err) {
    const auto start = std::chrono::steady_clock::now();
    const Settings settings = a.settings.resolve();
    const auto mode = docs::parse_mode(a.mode);
    const auto policy = parse_policy(a.policy);

    auto train = read_dialogues(a.train, a.strict, err);
    corpus::Catalog catalog = train.catalog;
    corpus::MetadataTable metadata;
    std::vector<std::string> warnings = train.warnings;
    if (!a.metadata.empty()) {
        auto md = corpus::parse_metadata_file(a.metadata, corpus::ParseOptions{a.strict});
        warnings.insert(warnings.end(), md.warnings.begin(), md.warnings.end());
        corpus::merge_catalog(catalog, md.items);
        metadata = std::move(md.metadata);
    } else if (mode != docs::Mode::kNoMetadata) {
        err << "warning: no --metadata given; documents carry titles only\n";
    }

    auto examples = corpus::extract_all(train.dialogues, policy);
    std::vector<corpus::Dialogue> all_dialogues = train.dialogues;
    std::size_t synthetic_dialogues = 0;
    if (!a.augmented.empty()) {
        auto synth = read_dialogues(a.augmented, a.strict, err);
        corpus::merge_catalog(catalog, synth.catalog);
        examples = augment::merge(examples, synth.dialogues, settings.augment, &warnings);
        for (auto& d : synth.dialogues) {
            if (!d.synthetic) {
                warnings.push_back("augmented dialogue " + d.dialogue_id + " is not tagged synthetic; skipped");
                continue;
            }
            ++synthetic_dialogues;
            all_dialogues.push_back(std::move(d));
        }
    }

    Stopwords stopwords;
    if (!a.stopwords.empty()) stopwords = Stopwords::load(a.stopwords);

    Engine engine;
    engine.policy = policy;
    engine.items = docs::ItemIndex::build(catalog, metadata, examples, mode, settings.bm25, stopwords, &warnings);
    users::ProfileOptions popts;
    popts.params = settings.bm25;
    popts.stopwords = stopwords.empty() ? nullptr : &engine.items.stopwords();
    popts.include_synthetic = a.include_synthetic_users;
    engine.profiles = std::make_shared<users::Profiles>(
        users::build_profiles(examples, all_dialogues, engine.items.catalog(), popts));
    engine.train_examples = std::move(examples);
    engine.report["dialogues"] = train.dialogues.size();
    engine.report["synthetic_dialogues"] = synthetic_dialogues;
    engine.report["warnings"] = warnings.size();
    engine.report["synthetic_in_profiles"] = a.include_synthetic_users;

    report_warnings(warnings, a.verbose, err);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto snap = write_snapshot(a.out, engine, secs);
    out << "built " << snap.string() << ": " << engine.report["items"] << " items, " << engine.report["dialogues"]
        << " dialogues, " << engine.report["train_examples"] << " examples, " << engine.report["synthetic_examples"]
        << " synthetic, manifest " << engine.report["manifest_hash"].get<std::string>() << ", " << secs << " s\n";
    return 0;
}

// ---- eval --------------------------------------------------------------

struct EvalArgs {
    std::string index, test, ks = "1,10,50", out = ".", sweep, synthetic, expect_catalog;
    bool user_select = false, buckets = false, strict = false, verbose = false;
    SettingFlags settings;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    const Settings settings = a.settings.resolve();
    const auto ks = parse_counts(a.ks, "k");
    for (auto k : ks)
        if (k == 0) throw InputError("k must be >= 1");
    const Engine engine = load_engine(a.index);
    const auto version = hex64(catalog_version(engine.items.catalog()));
    if (!a.expect_catalog.empty() && a.expect_catalog != version)
        throw InputError("catalog version mismatch: index has " + version + ", expected " + a.expect_catalog);

    auto test = read_dialogues(a.test, a.strict, err);
    report_warnings(test.warnings, a.verbose, err);
    const auto examples = corpus::extract_all(test.dialogues, engine.policy);
    std::size_t unknown_gold = 0;
    for (const auto& ex : examples) unknown_gold += engine.items.catalog().contains(ex.gold_item_id) ? 0 : 1;
    if (unknown_gold > 0) err << "warning: " << unknown_gold << " test example(s) have a gold item outside the catalog\n";

    std::size_t depth = eval::kRecordDepth;
    for (auto k : ks) depth = std::max(depth, k);

    std::map<std::string, const corpus::Dialogue*> by_id;
    for (const auto& d : test.dialogues) by_id.emplace(d.dialogue_id, &d);

    eval::Retriever retriever;
    if (a.user_select) {
        retriever = [&, depth](const corpus::RecExample& ex) {
            const auto liked = corpus::query_liked(*by_id.at(ex.dialogue_id), ex);
            return users::fused_search(engine.items.index(), *engine.profiles, engine.items.tokenize(ex.query_text),
                                       liked, settings.fusion, depth);
        };
    } else {
        retriever = eval::bm25_retriever(engine.items, depth);
    }
    auto report = eval::evaluate(retriever, examples, ks, settings.threads);
    const auto& params = engine.items.index().params();
    report.config["catalog_version"] = version;
    report.config["mode"] = docs::to_string(engine.items.mode());
    report.config["policy"] = to_string(engine.policy);
    report.config["k1"] = params.k1;
    report.config["b"] = params.b;
    report.config["user_select"] = a.user_select;
    if (a.user_select) {
        report.config["M"] = settings.fusion.num_users;
        report.config["lambda"] = settings.fusion.lambda;
        report.config["similarity"] = similarity_name(settings.fusion.similarity);
    }

    fs::create_directories(a.out);
    std::ostringstream records, summary;
    eval::write_records_jsonl(records, report);
    eval::write_summary(summary, report);
    write_text(fs::path(a.out) / "report.jsonl", records.str());
    write_text(fs::path(a.out) / "summary.txt", summary.str());
    out << summary.str();

    if (a.buckets) {
        const auto rows = eval::frequency_buckets(engine.train_examples, report);
        std::ostringstream csv;
        eval::write_bucket_csv(csv, rows);
        write_text(fs::path(a.out) / "buckets.csv", csv.str());
        out << "buckets:\n" << csv.str();
    }

    if (!a.sweep.empty()) {
        if (a.synthetic.empty()) throw InputError("--sweep needs --synthetic");
        const auto counts = parse_counts(a.sweep, "sweep count");
        auto synth = read_dialogues(a.synthetic, a.strict, err);
        std::vector<corpus::RecExample> genuine;
        for (const auto& ex : engine.train_examples)
            if (!ex.synthetic) genuine.push_back(ex);
        corpus::Catalog catalog = engine.items.catalog();
        corpus::merge_catalog(catalog, synth.catalog);
        eval::SweepSetup setup;
        setup.catalog = &catalog;
        setup.metadata = &engine.items.metadata();
        setup.mode = engine.items.mode();
        setup.params = params;
        setup.stopwords = engine.items.stopwords();
        setup.augment = settings.augment;
        setup.threads = settings.threads;
        const auto rows = eval::augmentation_sweep(genuine, synth.dialogues, counts, examples, setup);
        for (const auto& r : rows)
            for (const auto& n : r.notes) err << "note: " << n << '\n';
        std::ostringstream csv;
        eval::write_sweep_csv(csv, rows, report.records.size());
        write_text(fs::path(a.out) / "sweep.csv", csv.str());
        out << "sweep:\n" << csv.str();
    }
    return 0;
}

// ---- augment -----------------------------------------------------------

struct AugmentArgs {
    std::string train, metadata, out, replay;
    bool fixed_exemplars = false, strict = false, verbose = false;
    SettingFlags settings;
};

int cmd_augment(const AugmentArgs& a, std::ostream& out, std::ostream& err) {
    auto settings = a.settings.resolve();
    settings.augment.fixed_exemplars = a.fixed_exemplars;
    auto train = read_dialogues(a.train, a.strict, err);
    corpus::Catalog catalog = train.catalog;
    corpus::MetadataTable metadata;
    if (!a.metadata.empty()) {
        auto md = corpus::parse_metadata_file(a.metadata, corpus::ParseOptions{a.strict});
        corpus::merge_catalog(catalog, md.items);
        metadata = std::move(md.metadata);
    }
    const auto examples = corpus::extract_all(train.dialogues);

    std::unique_ptr<augment::GeneratorClient> generator;
    if (!a.replay.empty())
        generator = std::make_unique<augment::ReplayGenerator>(a.replay);
    else
        generator = std::make_unique<augment::HttpGenerator>(augment::HttpGenerator::from_env());

    auto run = augment::run_augmentation(train.dialogues, examples, catalog, metadata, *generator, settings.augment);
    report_warnings(run.warnings, a.verbose, err);
    std::ostringstream text;
    corpus::write_redial(text, run.dialogues);
    write_text(a.out, text.str());
    out << run.cold_items.size() << " cold items, " << run.requested << " requested, " << run.dialogues.size()
        << " kept, " << run.discarded << " discarded\n";
    return 0;
}

// ---- add-item ----------------------------------------------------------

struct AddItemArgs {
    std::string index, item, contexts;
};

int cmd_add_item(const AddItemArgs& a, std::ostream& out, std::ostream&) {
    const auto start = std::chrono::steady_clock::now();
    Engine engine = load_engine(a.index);
    std::istringstream line(read_file(a.item));
    auto parsed = corpus::parse_metadata(line, corpus::ParseOptions{true});
    if (parsed.items.size() != 1) throw InputError("--item must hold exactly one item record");
    const auto& item = parsed.items.begin()->second;
    const corpus::ItemMetadata* md = nullptr;
    if (auto it = parsed.metadata.find(item.item_id); it != parsed.metadata.end()) {
        const auto& m = it->second;
        if (!m.plot.empty() || !m.director.empty() || !m.actors.empty()) md = &m;
    }
    std::vector<std::string> contexts;
    if (!a.contexts.empty()) {
        std::istringstream in(read_file(a.contexts));
        for (std::string c; std::getline(in, c);)
            if (!c.empty()) contexts.push_back(c);
    }
    engine.items.register_new_item(item, md, std::move(contexts));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto snap = write_snapshot(a.index, engine, secs);
    out << "added " << item.item_id << " (" << item.title << "); now " << engine.items.catalog().size()
        << " items in " << snap.string() << '\n';
    return 0;
}

// ---- search ------------------------------------------------------------

struct SearchArgs {
    std::string index, query, liked;
    std::size_t k = 10;
    bool user_select = false;
    SettingFlags settings;
};

int cmd_search(const SearchArgs& a, std::ostream& out, std::ostream&) {
    const Settings settings = a.settings.resolve();
    if (a.k == 0) throw InputError("--k must be >= 1");
    const Engine engine = load_engine(a.index);
    const auto query = engine.items.tokenize(session_query({{corpus::Role::kSeeker, a.query}}, engine.items.catalog()));
    bm25::RankedList ranked;
    if (a.user_select) {
        std::set<corpus::ItemId> liked;
        std::stringstream ss(a.liked);
        for (std::string id; std::getline(ss, id, ',');)
            if (!id.empty()) liked.insert(id);
        ranked = users::fused_search(engine.items.index(), *engine.profiles, query, liked, settings.fusion, a.k);
    } else {
        ranked = engine.items.index().search(query, a.k);
    }
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        char score[32];
        std::snprintf(score, sizeof score, "%.6f", ranked[i].score);
        out << i + 1 << '\t' << ranked[i].doc_ref << '\t' << score << '\t'
            << engine.items.catalog().at(ranked[i].doc_ref).title << '\n';
    }
    return 0;
}

// ---- serve -------------------------------------------------------------

struct ServeArgs {
    std::string index, host = "127.0.0.1";
    int port = 8080;
    SettingFlags settings;
};

httplib::Server* g_server = nullptr;

extern "C" void stop_server(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
    const Settings settings = a.settings.resolve();
    Service service(std::make_shared<const Engine>(load_engine(a.index)), settings, fs::path(a.index));
    httplib::Server server;
    service.mount(server);

    // Picks up snapshots written by `crs add-item` from another process.
    std::jthread watcher([&](std::stop_token stop) {
        std::mutex mu;
        std::condition_variable_any cv;
        std::unique_lock lock(mu);
        while (true) {
            cv.wait_for(lock, stop, std::chrono::seconds(2), [] { return false; });
            if (stop.stop_requested()) break;
            try {
                if (service.reload_if_changed()) err << "reloaded " << current_snapshot(a.index).string() << '\n';
            } catch (const std::exception& e) {
                err << "warning: reload failed: " << e.what() << '\n';
            }
        }
    });

    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    out << "listening on " << a.host << ':' << a.port << std::endl;
    const bool ok = server.listen(a.host, a.port);
    g_server = nullptr;
    if (!ok) throw InputError("cannot listen on " + a.host + ":" + std::to_string(a.port));
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"BM25 conversational recommender: build, evaluate, augment and serve item indexes", "crs"};
    app.require_subcommand(1);

    BuildArgs build;
    auto* b = app.add_subcommand("build", "Build item documents, the BM25 index and user profiles");
    b->add_option("--train", build.train, "Training dialogues (line-delimited JSON)")->required();
    b->add_option("--metadata", build.metadata, "Item metadata (line-delimited JSON)");
    b->add_option("--mode", build.mode, "full | no_metadata | metadata_only");
    b->add_option("--out", build.out, "Index directory")->required();
    b->add_option("--augmented", build.augmented, "Synthetic dialogues to merge");
    b->add_option("--policy", build.policy, "all_agent_mentions | first_mention");
    b->add_option("--stopwords", build.stopwords, "Stopword list, one per line");
    b->add_flag("--include-synthetic-users", build.include_synthetic_users,
                "Let synthetic dialogues feed user profiles");
    b->add_flag("--strict", build.strict, "Fail on the first malformed input line");
    b->add_flag("--verbose", build.verbose, "List every warning");
    build.settings.attach(*b, kBuildKeys);

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate Recall@k on test dialogues");
    e->add_option("--index", ev.index, "Index directory")->required();
    e->add_option("--test", ev.test, "Test dialogues (line-delimited JSON)")->required();
    e->add_option("--ks", ev.ks, "Comma-separated cutoffs");
    e->add_option("--out", ev.out, "Report directory");
    e->add_flag("--user-select", ev.user_select, "Fuse scores from similar users");
    e->add_flag("--buckets", ev.buckets, "Write buckets.csv by training frequency");
    e->add_option("--sweep", ev.sweep, "Comma-separated synthetic counts per item");
    e->add_option("--synthetic", ev.synthetic, "Synthetic dialogues for --sweep");
    e->add_option("--expect-catalog", ev.expect_catalog, "Fail unless the index catalog version matches");
    e->add_flag("--strict", ev.strict, "Fail on the first malformed input line");
    e->add_flag("--verbose", ev.verbose, "List every warning");
    ev.settings.attach(*e, kEvalKeys);

    AugmentArgs aug;
    auto* g = app.add_subcommand("augment", "Generate synthetic dialogues for cold items");
    g->add_option("--train", aug.train, "Training dialogues")->required();
    g->add_option("--metadata", aug.metadata, "Item metadata");
    g->add_option("--out", aug.out, "Output file for synthetic dialogues")->required();
    g->add_option("--replay", aug.replay, "Directory of canned generations (<item_id>.txt)");
    g->add_flag("--fixed-exemplars", aug.fixed_exemplars, "Use one exemplar sample for every item");
    g->add_flag("--strict", aug.strict, "Fail on the first malformed input line");
    g->add_flag("--verbose", aug.verbose, "List every warning");
    aug.settings.attach(*g, kAugmentKeys);

    AddItemArgs add;
    auto* ai = app.add_subcommand("add-item", "Add one item to a built index without rebuilding");
    ai->add_option("--index", add.index, "Index directory")->required();
    ai->add_option("--item", add.item, "Item JSON: item_id, title, plot, director, actors")->required();
    ai->add_option("--contexts", add.contexts, "Expansion contexts, one per line");

    SearchArgs search;
    auto* s = app.add_subcommand("search", "Rank items for a free-text query");
    s->add_option("--index", search.index, "Index directory")->required();
    s->add_option("--query", search.query, "Query text")->required();
    s->add_option("--k", search.k, "Number of results");
    s->add_flag("--user-select", search.user_select, "Fuse scores from similar users");
    s->add_option("--liked", search.liked, "Comma-separated liked item ids");
    search.settings.attach(*s, {"m", "lambda", "similarity"});

    ServeArgs serve;
    auto* sv = app.add_subcommand("serve", "Run the HTTP recommendation service");
    sv->add_option("--index", serve.index, "Index directory")->required();
    sv->add_option("--port", serve.port, "Port");
    sv->add_option("--host", serve.host, "Bind address");
    serve.settings.attach(*sv, {"m", "lambda", "similarity"});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& pe) {
        const int code = app.exit(pe, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (b->parsed()) return cmd_build(build, out, err);
        if (e->parsed()) return cmd_eval(ev, out, err);
        if (g->parsed()) return cmd_augment(aug, out, err);
        if (ai->parsed()) return cmd_add_item(add, out, err);
        if (s->parsed()) return cmd_search(search, out, err);
        if (sv->parsed()) return cmd_serve(serve, out, err);
    } catch (const InputError& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    } catch (const fs::filesystem_error& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    } catch (const std::exception& ex) {
        err << "internal error: " << ex.what() << '\n';
        return 2;
    }
    return 2;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"crs"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace crs::app
