#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "crs/corpus.hpp"

namespace crs::augment {

/// Reserved worker id for the agent side of generated dialogues.
inline constexpr corpus::UserId kSyntheticAgent = -2;

struct AugmentConfig {
    std::size_t frequency_threshold = 10;
    std::size_t max_dialogues_per_item = 20;
    std::size_t fewshot_count = 6;
    std::uint64_t seed = 0;
    /// Reuse one exemplar sample for every item instead of resampling per item.
    bool fixed_exemplars = false;
};

struct GenerationRequest {
    corpus::ItemId item_id;
    std::string prompt;
    std::size_t count = 0;
};

/// Seam to whatever produces synthetic dialogues. Each returned string is one
/// candidate dialogue in `SEEKER:` / `AGENT:` line format.
class GeneratorClient {
public:
    virtual ~GeneratorClient() = default;
    virtual std::vector<std::string> generate(const GenerationRequest& request) = 0;
};

/// Splits a blob of dialogues separated by blank lines.
std::vector<std::string> split_candidates(const std::string& text);

/// Serves canned generations from `<dir>/<item_id>.txt` (blank-line separated
/// dialogues). Missing files yield no candidates. Prompts are recorded.
class ReplayGenerator : public GeneratorClient {
public:
    explicit ReplayGenerator(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::vector<std::string> generate(const GenerationRequest& request) override;
    const std::vector<GenerationRequest>& requests() const { return requests_; }

private:
    std::filesystem::path dir_;
    std::mutex mu_;
    std::vector<GenerationRequest> requests_;
};

/// Plain-text HTTP endpoint: POST prompt body, `X-Candidate-Count` and
/// `X-Item-Id` headers, optional bearer token. The response body is a
/// blank-line separated list of dialogues.
class HttpGenerator : public GeneratorClient {
public:
    HttpGenerator(std::string url, std::string token = {});
    /// Reads CRS_GENERATOR_URL and CRS_GENERATOR_TOKEN; throws InputError when the URL is unset.
    static HttpGenerator from_env();
    std::vector<std::string> generate(const GenerationRequest& request) override;

private:
    std::string host_;
    std::string path_;
    std::string token_;
};

/// Items with at most `threshold` genuine training examples, including catalog items with none.
std::set<corpus::ItemId> select_cold_items(std::span<const corpus::RecExample> train_examples,
                                           const corpus::Catalog& catalog, std::size_t threshold);

/// Seeded per item (or once, with fixed_exemplars) from config.seed.
std::mt19937_64 item_rng(const AugmentConfig& config, const corpus::ItemId& item_id);

std::string serialize_exemplar(const corpus::Dialogue& dialogue);

std::string build_fewshot_prompt(std::span<const corpus::Dialogue> train_dialogues, const corpus::Item& target,
                                 const corpus::ItemMetadata* metadata, const AugmentConfig& config,
                                 std::mt19937_64& rng, std::vector<std::string>* notes = nullptr);

struct ParsedGeneration {
    std::vector<corpus::Dialogue> dialogues;
    std::size_t discarded = 0;  // parsed but never recommended the target
    std::vector<std::string> warnings;
};

/// `first_index` numbers the produced dialogue ids (synthetic-<item>-<n>).
ParsedGeneration parse_generated(std::span<const std::string> raw, const corpus::Item& target,
                                 std::size_t first_index = 0);

/// Appends one example per synthetic dialogue (its first agent turn naming
/// the target) after the genuine pool, at most `max_dialogues_per_item`
/// dialogues per item. Dialogues already merged are skipped.
std::vector<corpus::RecExample> merge(std::span<const corpus::RecExample> train_examples,
                                      std::span<const corpus::Dialogue> synthetic_dialogues,
                                      const AugmentConfig& config, std::vector<std::string>* notes = nullptr);

struct AugmentationRun {
    std::vector<corpus::Dialogue> dialogues;
    std::set<corpus::ItemId> cold_items;
    std::size_t requested = 0;
    std::size_t discarded = 0;
    std::vector<std::string> warnings;
};

/// Full cold-start pipeline: pick cold items, prompt the generator for each
/// (in ascending item order) and parse what comes back.
AugmentationRun run_augmentation(std::span<const corpus::Dialogue> train_dialogues,
                                 std::span<const corpus::RecExample> train_examples,
                                 const corpus::Catalog& catalog, const corpus::MetadataTable& metadata,
                                 GeneratorClient& generator, const AugmentConfig& config);

}  // namespace crs::augment
