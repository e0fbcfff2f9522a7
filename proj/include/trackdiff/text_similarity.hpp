#ifndef TRACKDIFF_TEXT_SIMILARITY_HPP_
#define TRACKDIFF_TEXT_SIMILARITY_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <string_view>

namespace trackdiff {

using TokenCounts = std::map<std::string, int>;

// Natural-language tokenization: lowercased alphanumeric runs.
inline TokenCounts text_tokens(std::string_view s) {
    TokenCounts counts;
    std::string token;
    auto flush = [&]() {
        if (!token.empty()) {
            ++counts[token];
            token.clear();
        }
    };
    for (char c : s) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u))
            token.push_back(static_cast<char>(std::tolower(u)));
        else
            flush();
    }
    flush();
    return counts;
}

// Code tokenization: case-sensitive identifiers (with '_' and '$'),
// digit runs, and each remaining non-space character on its own.
inline TokenCounts code_tokens(std::string_view s) {
    TokenCounts counts;
    std::size_t i = 0;
    auto is_ident_start = [](unsigned char c) { return std::isalpha(c) || c == '_' || c == '$'; };
    auto is_ident = [&](unsigned char c) { return std::isalnum(c) || c == '_' || c == '$'; };
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (is_ident_start(c)) {
            std::size_t j = i + 1;
            while (j < s.size() && is_ident(static_cast<unsigned char>(s[j]))) ++j;
            ++counts[std::string(s.substr(i, j - i))];
            i = j;
        } else if (std::isdigit(c)) {
            std::size_t j = i + 1;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            ++counts[std::string(s.substr(i, j - i))];
            i = j;
        } else {
            ++counts[std::string(1, s[i])];
            ++i;
        }
    }
    return counts;
}

// Cosine over count vectors. Two empty vectors are identical by
// convention (1.0); one empty vector is orthogonal to anything (0.0).
inline double cosine_of_counts(const TokenCounts& a, const TokenCounts& b) {
    if (a == b) return 1.0;  // identical multisets compare exactly
    if (a.empty() || b.empty()) return 0.0;
    double dot = 0, na = 0, nb = 0;
    for (const auto& [token, count] : a) {
        na += static_cast<double>(count) * count;
        auto it = b.find(token);
        if (it != b.end()) dot += static_cast<double>(count) * it->second;
    }
    for (const auto& [token, count] : b) nb += static_cast<double>(count) * count;
    if (na == 0 || nb == 0) return 0.0;
    return std::min(1.0, dot / (std::sqrt(na) * std::sqrt(nb)));
}

// Similarity of two texts over word-token multisets; symmetric, in [0,1],
// exactly 1.0 iff the multisets are identical.
inline double text_similarity(std::string_view a, std::string_view b) {
    return cosine_of_counts(text_tokens(a), text_tokens(b));
}

}  // namespace trackdiff

#endif  // TRACKDIFF_TEXT_SIMILARITY_HPP_
