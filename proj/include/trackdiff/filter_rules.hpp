#ifndef TRACKDIFF_FILTER_RULES_HPP_
#define TRACKDIFF_FILTER_RULES_HPP_

#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trackdiff/errors.hpp"
#include "trackdiff/public_suffix.hpp"
#include "trackdiff/trace.hpp"
#include "trackdiff/url.hpp"

namespace trackdiff {

// Address pattern of a network rule. Anchors: "||" (host), leading and
// trailing "|". "*" is a wildcard, "^" matches a separator or the end of
// the address. Regex patterns ("/.../" ) are carried opaquely and never
// match, keeping the matcher deterministic across engines.
struct AddressPattern {
    std::string body;  // pattern text without anchors
    bool host_anchor = false;
    bool start_anchor = false;
    bool end_anchor = false;
    bool is_regex = false;

    bool operator==(const AddressPattern&) const = default;
};

struct RuleOptions {
    std::vector<std::string> include_domains;
    std::vector<std::string> exclude_domains;
    std::optional<std::string> removeparam;
    std::optional<std::string> cookie;
    std::optional<bool> third_party;          // $third-party / $~third-party
    std::vector<std::string> opaque;          // recognized but unmodeled, verbatim

    bool operator==(const RuleOptions&) const = default;
};

struct FilterRule {
    std::string raw;
    bool exception = false;
    AddressPattern pattern;
    RuleOptions options;

    bool is_field_rule() const { return options.removeparam || options.cookie; }

    bool operator==(const FilterRule&) const = default;
};

enum class MatchDecision { block, exempt, strip_field, no_match };

struct MatchOutcome {
    MatchDecision decision = MatchDecision::no_match;
    std::optional<FilterRule> rule;
    std::optional<RequestField> field;
};

namespace detail {

inline bool is_separator_char(char c) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) return false;
    return c != '_' && c != '-' && c != '.' && c != '%';
}

// Match one literal segment (may contain '^') at position `pos`.
// Returns the end position or npos.
inline std::size_t match_segment(std::string_view url, std::size_t pos, std::string_view seg) {
    for (char c : seg) {
        if (c == '^') {
            if (pos < url.size() && is_separator_char(url[pos])) {
                ++pos;
            } else if (pos == url.size()) {
                // '^' also matches the end of the address, consuming nothing.
            } else {
                return std::string_view::npos;
            }
        } else {
            if (pos >= url.size() || url[pos] != c) return std::string_view::npos;
            ++pos;
        }
    }
    return pos;
}

// Segments after the first are preceded by '*', which matches any run.
inline bool match_rest(std::string_view url, std::size_t pos,
                       const std::vector<std::string>& segs, std::size_t k,
                       bool end_anchor) {
    if (k == segs.size()) return !end_anchor || pos == url.size();
    for (std::size_t start = pos; start <= url.size(); ++start) {
        std::size_t end = match_segment(url, start, segs[k]);
        if (end != std::string_view::npos && match_rest(url, end, segs, k + 1, end_anchor))
            return true;
    }
    return false;
}

// The first segment must begin exactly at `pos`.
inline bool match_at(std::string_view url, std::size_t pos,
                     const std::vector<std::string>& segs, bool end_anchor) {
    std::size_t end = match_segment(url, pos, segs[0]);
    if (end == std::string_view::npos) return false;
    return match_rest(url, end, segs, 1, end_anchor);
}

// Positions where a host-anchored pattern may begin: the start of the
// hostname and every label boundary inside it.
inline std::vector<std::size_t> host_anchor_positions(std::string_view url) {
    std::vector<std::size_t> out;
    std::size_t scheme = url.find("://");
    std::size_t host_start = scheme == std::string_view::npos ? 0 : scheme + 3;
    std::size_t host_end = url.size();
    for (std::size_t i = host_start; i < url.size(); ++i) {
        char c = url[i];
        if (c == '/' || c == '?' || c == '#' || c == ':') {
            host_end = i;
            break;
        }
    }
    std::size_t at = url.substr(host_start, host_end - host_start).rfind('@');
    if (at != std::string_view::npos) host_start += at + 1;
    out.push_back(host_start);
    for (std::size_t i = host_start + 1; i < host_end; ++i)
        if (url[i - 1] == '.') out.push_back(i);
    return out;
}

inline bool looks_like_options(std::string_view s) {
    if (s.empty()) return false;
    for (std::string_view piece : split(s, ',')) {
        std::string_view name = piece;
        std::size_t eq = piece.find('=');
        if (eq != std::string_view::npos) name = piece.substr(0, eq);
        if (!name.empty() && name[0] == '~') name.remove_prefix(1);
        if (name.empty()) return false;
        for (char c : name) {
            bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '-' || c == '_';
            if (!ok) return false;
        }
    }
    return true;
}

// True when `page_host` is `domain` or one of its subdomains.
inline bool host_under(std::string_view page_host, std::string_view domain) {
    if (page_host == domain) return true;
    return page_host.size() > domain.size() &&
           page_host.ends_with(domain) &&
           page_host[page_host.size() - domain.size() - 1] == '.';
}

}  // namespace detail

// Parses one network rule line. Comments ("!"), list headers ("[Adblock...")
// and cosmetic/HTML filters ("##", "#@#", "#?#", "$$") are not network rules
// and raise UnsupportedRule. Unknown "$" options are preserved opaquely.
inline FilterRule parse_rule(std::string_view line_in) {
    std::string_view line = trim(line_in);
    if (line.empty()) throw MalformedRule("empty line");
    if (line[0] == '!' || line.starts_with("[Adblock"))
        throw UnsupportedRule("comment: " + std::string(line));
    for (std::string_view marker : {"##", "#@#", "#?#", "#$#", "$$"})
        if (line.find(marker) != std::string_view::npos)
            throw UnsupportedRule("cosmetic or HTML filter: " + std::string(line));

    FilterRule rule;
    rule.raw = std::string(line);

    std::string_view rest = line;
    if (rest.starts_with("@@")) {
        rule.exception = true;
        rest.remove_prefix(2);
    }

    // Option suffix: the last '$' whose tail parses as an option list.
    std::string_view pattern_text = rest;
    std::size_t dollar = rest.rfind('$');
    if (dollar != std::string_view::npos && detail::looks_like_options(rest.substr(dollar + 1))) {
        pattern_text = rest.substr(0, dollar);
        for (std::string_view piece : split(rest.substr(dollar + 1), ',')) {
            std::string_view name = piece;
            std::string_view value;
            std::size_t eq = piece.find('=');
            if (eq != std::string_view::npos) {
                name = piece.substr(0, eq);
                value = piece.substr(eq + 1);
            }
            if (name == "domain") {
                for (std::string_view d : split(value, '|')) {
                    if (d.empty()) continue;
                    if (d[0] == '~')
                        rule.options.exclude_domains.push_back(to_lower(d.substr(1)));
                    else
                        rule.options.include_domains.push_back(to_lower(d));
                }
            } else if (name == "removeparam" && eq != std::string_view::npos && !value.empty() &&
                       value[0] != '/' && value[0] != '~') {
                rule.options.removeparam = std::string(value);
            } else if (name == "cookie" && eq != std::string_view::npos && !value.empty() &&
                       value[0] != '/' && value[0] != '~') {
                rule.options.cookie = std::string(value);
            } else if (name == "third-party" || name == "3p") {
                rule.options.third_party = true;
            } else if (name == "~third-party" || name == "~3p" || name == "first-party" || name == "1p") {
                rule.options.third_party = false;
            } else {
                rule.options.opaque.emplace_back(piece);
            }
        }
    }
    if (rule.options.removeparam && rule.options.cookie)
        throw MalformedRule("both removeparam and cookie: " + std::string(line));

    if (pattern_text.size() >= 2 && pattern_text.front() == '/' && pattern_text.back() == '/') {
        rule.pattern.is_regex = true;
        rule.pattern.body = std::string(pattern_text);
        return rule;
    }
    if (pattern_text.starts_with("||")) {
        rule.pattern.host_anchor = true;
        pattern_text.remove_prefix(2);
    } else if (pattern_text.starts_with("|")) {
        rule.pattern.start_anchor = true;
        pattern_text.remove_prefix(1);
    }
    if (pattern_text.ends_with("|")) {
        rule.pattern.end_anchor = true;
        pattern_text.remove_suffix(1);
    }
    if (pattern_text.find('|') != std::string_view::npos)
        throw MalformedRule("stray '|' inside pattern: " + std::string(line));
    rule.pattern.body = std::string(pattern_text);
    return rule;
}

// Re-emits the single-line form. Parsed rules keep their original text.
inline std::string emit_rule(const FilterRule& rule) { return rule.raw; }

inline bool pattern_matches_url(const AddressPattern& p, std::string_view url_in) {
    if (p.is_regex) return false;
    std::string url = to_lower(url_in);
    std::string body = to_lower(p.body);
    std::vector<std::string> segs = split(body, '*');

    if (p.host_anchor) {
        for (std::size_t pos : detail::host_anchor_positions(url))
            if (detail::match_at(url, pos, segs, p.end_anchor)) return true;
        return false;
    }
    if (p.start_anchor) return detail::match_at(url, 0, segs, p.end_anchor);
    // Unanchored: the first segment may start anywhere.
    for (std::size_t pos = 0; pos <= url.size(); ++pos)
        if (detail::match_at(url, pos, segs, p.end_anchor)) return true;
    return false;
}

// Pattern plus options against one request in the context of a page.
inline bool rule_applies(const FilterRule& rule, const RequestRecord& request,
                         const Url& page) {
    if (!pattern_matches_url(rule.pattern, request.url)) return false;
    if (rule.options.third_party.has_value()) {
        bool is_third = request.partiness == Partiness::third;
        if (is_third != *rule.options.third_party) return false;
    }
    if (!rule.options.include_domains.empty()) {
        bool included = false;
        for (const std::string& d : rule.options.include_domains)
            included = included || detail::host_under(page.host, d);
        if (!included) return false;
    }
    for (const std::string& d : rule.options.exclude_domains)
        if (detail::host_under(page.host, d)) return false;
    return true;
}

struct RuleSet {
    std::vector<FilterRule> rules;
    int skipped = 0;  // unsupported lines encountered by load

    static RuleSet from_lines(const std::vector<std::string>& lines) {
        RuleSet set;
        for (const std::string& line : lines) {
            if (trim(line).empty()) continue;
            try {
                set.rules.push_back(parse_rule(line));
            } catch (const UnsupportedRule&) {
                ++set.skipped;
            }
        }
        return set;
    }

    static RuleSet load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error(path.string() + ": cannot open filter list");
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        return from_lines(lines);
    }

    void append(const RuleSet& other) {
        rules.insert(rules.end(), other.rules.begin(), other.rules.end());
        skipped += other.skipped;
    }
};

// Decides the fate of one request. Exceptions dominate block rules; block
// rules dominate field rules; within each class the first matching rule in
// list order wins. Field actions beyond the first are reported by
// field_actions().
inline MatchOutcome match_request(const RuleSet& rules, const RequestRecord& request,
                                  const std::string& page_url) {
    Url page = Url::parse(page_url);
    const FilterRule* block = nullptr;
    std::optional<MatchOutcome> strip;
    for (const FilterRule& rule : rules.rules) {
        if (!rule_applies(rule, request, page)) continue;
        if (rule.exception) return {MatchDecision::exempt, rule, std::nullopt};
        if (rule.is_field_rule()) {
            if (strip) continue;
            FieldKind kind = rule.options.removeparam ? FieldKind::query_param : FieldKind::cookie;
            std::string name = rule.options.removeparam ? *rule.options.removeparam
                                                        : *rule.options.cookie;
            for (const RequestField& f : request.fields())
                if (f.kind == kind && f.name == name) {
                    strip = MatchOutcome{MatchDecision::strip_field, rule, f};
                    break;
                }
        } else if (!block) {
            block = &rule;
        }
    }
    if (block) return {MatchDecision::block, *block, std::nullopt};
    if (strip) return *strip;
    return {MatchDecision::no_match, std::nullopt, std::nullopt};
}

// Every strip_field outcome, one per (rule, named field present on the
// request), in list order.
inline std::vector<MatchOutcome> field_actions(const RuleSet& rules, const RequestRecord& request,
                                               const std::string& page_url) {
    Url page = Url::parse(page_url);
    std::vector<MatchOutcome> out;
    for (const FilterRule& rule : rules.rules) {
        if (rule.exception || !rule.is_field_rule()) continue;
        if (!rule_applies(rule, request, page)) continue;
        FieldKind kind = rule.options.removeparam ? FieldKind::query_param : FieldKind::cookie;
        std::string name = rule.options.removeparam ? *rule.options.removeparam : *rule.options.cookie;
        for (const RequestField& f : request.fields())
            if (f.kind == kind && f.name == name)
                out.push_back({MatchDecision::strip_field, rule, f});
    }
    return out;
}

// Turns an exception rule into the block rule it papers over: the text
// minus the "@@" prefix, everything else untouched.
inline FilterRule flip_exception(const FilterRule& rule) {
    if (!rule.exception) throw NotAnException("not an exception rule: " + rule.raw);
    FilterRule flipped = rule;
    flipped.exception = false;
    flipped.raw = rule.raw.substr(2);
    return flipped;
}

enum class RuleKind { block, removeparam, cookie };

struct RuleSpec {
    RuleKind kind = RuleKind::block;
    RequestRecord request;
    std::optional<RequestField> field;
};

// Emits a new rule in uBO syntax. Block rules anchor on the request's
// host+path; field rules anchor on the registrable domain so one rule
// covers every subdomain of the server.
inline FilterRule generate_rule(const RuleSpec& spec) {
    if (spec.kind != RuleKind::block && !spec.field)
        throw MissingField("field required for removeparam/cookie rules");
    Url u = Url::parse(spec.request.url);
    std::string raw;
    if (spec.kind == RuleKind::block) {
        raw = "||" + u.host + u.path;
    } else {
        std::string option = spec.kind == RuleKind::removeparam ? "removeparam" : "cookie";
        raw = "||" + registrable_domain(u.host) + "^$" + option + "=" + spec.field->name;
    }
    return parse_rule(raw);
}

}  // namespace trackdiff

#endif  // TRACKDIFF_FILTER_RULES_HPP_
