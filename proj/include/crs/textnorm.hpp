#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace crs {

/// The masking sentinel. It survives tokenization verbatim (uppercase).
inline constexpr std::string_view kRecToken = "[REC]";

using TokenStream = std::vector<std::string>;

class Stopwords {
public:
    Stopwords() = default;
    explicit Stopwords(std::unordered_set<std::string> words) : words_(std::move(words)) {}

    /// One word per line, normalized like any other text; blank lines ignored.
    static Stopwords load(const std::filesystem::path& path);

    bool contains(std::string_view token) const { return words_.contains(std::string(token)); }
    bool empty() const { return words_.empty(); }
    std::size_t size() const { return words_.size(); }
    std::vector<std::string> sorted() const;

private:
    std::unordered_set<std::string> words_;
};

/// Lowercases, keeps `[REC]` (matched case-insensitively) as one token and
/// splits everything else on non-alphanumeric ASCII bytes.
TokenStream tokenize(std::string_view text, const Stopwords* stopwords = nullptr);

/// Appends tokens of `text` to `out` without allocating a fresh vector.
void tokenize_into(std::string_view text, TokenStream& out, const Stopwords* stopwords = nullptr);

std::string join_tokens(const TokenStream& tokens);

}  // namespace crs
