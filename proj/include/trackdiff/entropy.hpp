#ifndef TRACKDIFF_ENTROPY_HPP_
#define TRACKDIFF_ENTROPY_HPP_

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "trackdiff/public_suffix.hpp"
#include "trackdiff/trace.hpp"
#include "trackdiff/url.hpp"

namespace trackdiff {

using BigInt = boost::multiprecision::cpp_int;

// Character classes ordered by size; a value classifies as the smallest
// class containing every non-separator character.
enum class CharsetClass {
    decimal,       // 10
    lower_hex,     // 16
    upper_hex,     // 16
    lower_alpha,   // 26
    alpha,         // 52
    alphanumeric,  // 62
    base64,        // 64: alphanumeric plus '+', '/', '='
    printable,     // 95
};

inline int charset_size(CharsetClass c) {
    switch (c) {
        case CharsetClass::decimal: return 10;
        case CharsetClass::lower_hex: return 16;
        case CharsetClass::upper_hex: return 16;
        case CharsetClass::lower_alpha: return 26;
        case CharsetClass::alpha: return 52;
        case CharsetClass::alphanumeric: return 62;
        case CharsetClass::base64: return 64;
        case CharsetClass::printable: return 95;
    }
    return 95;
}

inline const char* to_string(CharsetClass c) {
    switch (c) {
        case CharsetClass::decimal: return "decimal";
        case CharsetClass::lower_hex: return "lower-hex";
        case CharsetClass::upper_hex: return "upper-hex";
        case CharsetClass::lower_alpha: return "lower-alpha";
        case CharsetClass::alpha: return "alpha";
        case CharsetClass::alphanumeric: return "alphanumeric";
        case CharsetClass::base64: return "base64";
        case CharsetClass::printable: return "printable";
    }
    return "?";
}

// Segment separators: punctuation in structured values (versions, dates,
// compound keys) that does not add identifier entropy itself.
inline bool is_field_separator(char c) { return c == '.' || c == '-' || c == '_' || c == ':'; }

namespace detail {

inline bool class_contains(CharsetClass cls, char c) {
    bool digit = c >= '0' && c <= '9';
    bool lower = c >= 'a' && c <= 'z';
    bool upper = c >= 'A' && c <= 'Z';
    switch (cls) {
        case CharsetClass::decimal: return digit;
        case CharsetClass::lower_hex: return digit || (c >= 'a' && c <= 'f');
        case CharsetClass::upper_hex: return digit || (c >= 'A' && c <= 'F');
        case CharsetClass::lower_alpha: return lower;
        case CharsetClass::alpha: return lower || upper;
        case CharsetClass::alphanumeric: return digit || lower || upper;
        case CharsetClass::base64: return digit || lower || upper || c == '+' || c == '/' || c == '=';
        case CharsetClass::printable: return true;  // top class takes the rest
    }
    return true;
}

inline constexpr CharsetClass kClassOrder[] = {
    CharsetClass::decimal,      CharsetClass::lower_hex, CharsetClass::upper_hex,
    CharsetClass::lower_alpha,  CharsetClass::alpha,     CharsetClass::alphanumeric,
    CharsetClass::base64,       CharsetClass::printable,
};

}  // namespace detail

// Smallest class covering every non-separator character, with its size.
// An empty (or all-separator) value classifies as decimal over length 0.
inline std::pair<CharsetClass, int> charset_class(std::string_view value) {
    for (CharsetClass cls : detail::kClassOrder) {
        bool ok = true;
        for (char c : value) {
            if (is_field_separator(c)) continue;
            if (!detail::class_contains(cls, c)) {
                ok = false;
                break;
            }
        }
        if (ok) return {cls, charset_size(cls)};
    }
    return {CharsetClass::printable, charset_size(CharsetClass::printable)};
}

struct EntropyEstimate {
    BigInt combinations = 1;
    CharsetClass charset = CharsetClass::decimal;
    int length_basis = 0;  // non-separator characters counted
};

// Combinations a field value could hold: the value splits on separators
// and each segment contributes (class size ^ segment length). Keeps
// "1.106.0" at 10^5 while a 32-char hex id yields 16^32.
inline EntropyEstimate field_entropy(const RequestField& field) {
    EntropyEstimate out;
    out.charset = charset_class(field.value).first;

    std::string segment;
    auto flush = [&]() {
        if (segment.empty()) return;
        auto [seg_cls, seg_size] = charset_class(segment);
        BigInt factor = 1;
        for (std::size_t i = 0; i < segment.size(); ++i) factor *= seg_size;
        out.combinations *= factor;
        out.length_basis += static_cast<int>(segment.size());
        segment.clear();
    };
    for (char c : field.value) {
        if (is_field_separator(c))
            flush();
        else
            segment.push_back(c);
    }
    flush();
    return out;
}

// Joint combinations of all fields a single server receives, deduplicated
// by (name, value): the server could assemble one identifier from many
// low-entropy fields.
inline EntropyEstimate server_entropy(const std::vector<RequestField>& fields) {
    EntropyEstimate out;
    std::set<std::pair<std::string, std::string>> seen;
    for (const RequestField& field : fields) {
        if (!seen.insert({field.name, field.value}).second) continue;
        EntropyEstimate fe = field_entropy(field);
        out.combinations *= fe.combinations;
        out.length_basis += fe.length_basis;
    }
    return out;
}

struct EntropyThresholds {
    BigInt per_field = BigInt(1000000000);          // 10^9
    BigInt per_server = BigInt(1000000000000LL);    // 10^12
};

struct SelectedField {
    RequestRecord request;
    RequestField field;
    BigInt combinations;
    bool by_field = false;
    bool by_server = false;
};

// Identifier-like field selection: a field survives if its own entropy
// clears the per-field threshold, or its server group's joint entropy
// clears the per-server threshold. Output order is trace order.
inline std::vector<SelectedField> select_fields(const std::vector<RequestRecord>& requests,
                                                const EntropyThresholds& thresholds = {}) {
    struct Entry {
        std::size_t request_index;
        RequestField field;
        BigInt combinations;
        std::string server;
    };
    std::vector<Entry> entries;
    std::map<std::string, std::vector<RequestField>> servers;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        std::string server = registrable_domain(Url::parse(requests[i].url).host);
        for (const RequestField& field : requests[i].fields()) {
            entries.push_back({i, field, field_entropy(field).combinations, server});
            servers[server].push_back(field);
        }
    }
    std::map<std::string, BigInt> server_combinations;
    for (const auto& [server, fields] : servers)
        server_combinations[server] = server_entropy(fields).combinations;

    std::vector<SelectedField> out;
    for (const Entry& entry : entries) {
        bool by_field = entry.combinations > thresholds.per_field;
        bool by_server = server_combinations[entry.server] > thresholds.per_server;
        if (by_field || by_server)
            out.push_back({requests[entry.request_index], entry.field, entry.combinations,
                           by_field, by_server});
    }
    return out;
}

}  // namespace trackdiff

#endif  // TRACKDIFF_ENTROPY_HPP_
