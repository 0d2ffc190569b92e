#include "crs/textnorm.hpp"

#include <algorithm>
#include <fstream>

#include "crs/errors.hpp"

namespace crs {
namespace {

constexpr bool is_word_byte(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

constexpr char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool starts_with_rec(std::string_view text, std::size_t pos) {
    if (pos + kRecToken.size() > text.size()) return false;
    for (std::size_t i = 0; i < kRecToken.size(); ++i) {
        if (ascii_lower(text[pos + i]) != ascii_lower(kRecToken[i])) return false;
    }
    return true;
}

}  // namespace

Stopwords Stopwords::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read stopword file: " + path.string());
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line))
        for (auto& t : tokenize(line)) words.insert(std::move(t));
    return Stopwords(std::move(words));
}

std::vector<std::string> Stopwords::sorted() const {
    std::vector<std::string> out(words_.begin(), words_.end());
    std::sort(out.begin(), out.end());
    return out;
}

void tokenize_into(std::string_view text, TokenStream& out, const Stopwords* stopwords) {
    const bool filter = stopwords != nullptr && !stopwords->empty();
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        if (!filter || !stopwords->contains(current)) out.push_back(std::move(current));
        current.clear();
    };

    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '[' && starts_with_rec(text, i)) {
            flush();
            out.emplace_back(kRecToken);
            i += kRecToken.size();
            continue;
        }
        if (is_word_byte(c)) {
            current.push_back(ascii_lower(c));
        } else {
            flush();
        }
        ++i;
    }
    flush();
}

TokenStream tokenize(std::string_view text, const Stopwords* stopwords) {
    TokenStream out;
    tokenize_into(text, out, stopwords);
    return out;
}

std::string join_tokens(const TokenStream& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

}  // namespace crs
