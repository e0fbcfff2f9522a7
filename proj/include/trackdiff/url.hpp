#ifndef TRACKDIFF_URL_HPP_
#define TRACKDIFF_URL_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trackdiff/util.hpp"

namespace trackdiff {

// Minimal absolute-URL splitter. Enough for filter matching, field
// extraction and partiness; not a general-purpose RFC 3986 parser.
struct Url {
    std::string scheme;    // lowercased, no "://"
    std::string host;      // lowercased, no port
    std::string port;      // digits or empty
    std::string path;      // leading "/", or empty
    std::string query;     // without "?"
    std::string fragment;  // without "#"

    static Url parse(std::string_view raw) {
        Url u;
        std::size_t scheme_end = raw.find("://");
        std::size_t rest_start = 0;
        if (scheme_end != std::string_view::npos) {
            u.scheme = to_lower(raw.substr(0, scheme_end));
            rest_start = scheme_end + 3;
        }
        std::string_view rest = raw.substr(rest_start);

        std::size_t frag = rest.find('#');
        if (frag != std::string_view::npos) {
            u.fragment = std::string(rest.substr(frag + 1));
            rest = rest.substr(0, frag);
        }
        std::size_t q = rest.find('?');
        if (q != std::string_view::npos) {
            u.query = std::string(rest.substr(q + 1));
            rest = rest.substr(0, q);
        }
        std::size_t path_start = rest.find('/');
        std::string_view authority = rest;
        if (path_start != std::string_view::npos) {
            u.path = std::string(rest.substr(path_start));
            authority = rest.substr(0, path_start);
        }
        std::size_t at = authority.rfind('@');
        if (at != std::string_view::npos) authority = authority.substr(at + 1);
        std::size_t colon = authority.rfind(':');
        if (colon != std::string_view::npos &&
            authority.find(']') == std::string_view::npos) {
            u.port = std::string(authority.substr(colon + 1));
            authority = authority.substr(0, colon);
        }
        u.host = to_lower(authority);
        return u;
    }
};

inline std::string percent_decode(std::string_view s) {
    auto hex_val = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            int hi = hex_val(s[i + 1]);
            int lo = hex_val(s[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out.push_back(static_cast<char>(hi * 16 + lo));
                i += 2;
                continue;
            }
        }
        out.push_back(s[i]);
    }
    return out;
}

// Query-string parameters in document order. Values are percent-decoded;
// names are kept verbatim. A bare "flag" token becomes ("flag", "").
inline std::vector<std::pair<std::string, std::string>> query_params(const Url& u) {
    std::vector<std::pair<std::string, std::string>> out;
    if (u.query.empty()) return out;
    for (const std::string& piece : split(u.query, '&')) {
        if (piece.empty()) continue;
        std::size_t eq = piece.find('=');
        if (eq == std::string::npos) {
            out.emplace_back(piece, "");
        } else {
            out.emplace_back(piece.substr(0, eq), percent_decode(piece.substr(eq + 1)));
        }
    }
    return out;
}

}  // namespace trackdiff

#endif  // TRACKDIFF_URL_HPP_
