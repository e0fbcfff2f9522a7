#ifndef TRACKDIFF_PUBLIC_SUFFIX_HPP_
#define TRACKDIFF_PUBLIC_SUFFIX_HPP_

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "trackdiff/util.hpp"

namespace trackdiff {

// Static snapshot of common public-suffix rules. Deliberately frozen:
// partiness decisions must not drift with list updates. Syntax follows
// the published list format: plain rules, "*." wildcards and "!"
// exceptions. Unlisted TLDs fall back to the implicit "*" rule.
namespace detail {
inline constexpr std::array<std::string_view, 115> kPublicSuffixSnapshot = {
    "com", "org", "net", "edu", "gov", "mil", "int", "info", "biz", "name",
    "pro", "mobi", "app", "dev", "io", "co", "ai", "me", "tv", "cc",
    "xyz", "online", "site", "club", "shop", "blog", "news", "cloud", "page", "store",
    "us", "uk", "fr", "de", "jp", "cn", "ru", "nl", "it", "es",
    "se", "no", "fi", "dk", "pl", "cz", "ca", "au", "br", "in",
    "kr", "mx", "ch", "at", "be", "pt", "gr", "tr", "ie", "il",
    "nz", "za", "ar", "cl", "hu", "ro", "sk", "si", "hr", "bg",
    "lt", "lv", "ee", "is", "lu", "ua", "sg", "hk", "tw", "my",
    "th", "vn", "id", "ph",
    "co.uk", "org.uk", "ac.uk", "gov.uk", "me.uk", "net.uk",
    "com.au", "net.au", "org.au", "edu.au", "gov.au",
    "co.jp", "or.jp", "ne.jp", "ac.jp", "go.jp",
    "co.kr", "or.kr",
    "com.br", "net.br", "org.br",
    "com.cn", "net.cn", "org.cn",
    "co.in", "net.in", "org.in",
    "*.ck", "!www.ck",
    "github.io", "blogspot.com",
};
}  // namespace detail

// Longest matching public suffix of `host` per the list algorithm:
// exception rules win, then the longest (most labels) matching rule,
// then the implicit "*" rule (the rightmost label).
inline std::string public_suffix(std::string_view host_in) {
    std::string host = to_lower(host_in);
    if (host.empty()) return host;
    std::vector<std::string> labels = split(host, '.');

    auto rule_matches = [&](std::string_view rule) {
        std::vector<std::string> rl = split(rule, '.');
        if (rl.size() > labels.size()) return false;
        for (std::size_t i = 0; i < rl.size(); ++i) {
            const std::string& r = rl[rl.size() - 1 - i];
            const std::string& l = labels[labels.size() - 1 - i];
            if (r != "*" && r != l) return false;
        }
        return true;
    };
    auto suffix_of_labels = [&](std::size_t n) {
        std::string out;
        for (std::size_t i = labels.size() - n; i < labels.size(); ++i) {
            if (!out.empty()) out += '.';
            out += labels[i];
        }
        return out;
    };

    // Exception rule: its match is public down to one label fewer.
    for (std::string_view rule : detail::kPublicSuffixSnapshot) {
        if (rule.empty() || rule[0] != '!') continue;
        if (rule_matches(rule.substr(1))) {
            std::size_t n = static_cast<std::size_t>(
                std::count(rule.begin(), rule.end(), '.'));  // labels - 1
            return suffix_of_labels(n);
        }
    }
    std::size_t best = 1;  // implicit "*"
    for (std::string_view rule : detail::kPublicSuffixSnapshot) {
        if (rule.empty() || rule[0] == '!') continue;
        if (rule_matches(rule)) {
            std::size_t n = static_cast<std::size_t>(
                                std::count(rule.begin(), rule.end(), '.')) + 1;
            best = std::max(best, n);
        }
    }
    if (best >= labels.size()) return host;
    return suffix_of_labels(best);
}

// The suffix plus one label; the unit at which two hosts count as the
// same party. Hosts that are themselves a suffix (or IP literals,
// which contain no alphabetic TLD) come back unchanged.
inline std::string registrable_domain(std::string_view host_in) {
    std::string host = to_lower(host_in);
    if (host.empty()) return host;
    bool numeric = host.find_first_not_of("0123456789.") == std::string::npos;
    if (numeric || host.find('.') == std::string::npos) return host;

    std::string suffix = public_suffix(host);
    if (suffix.size() >= host.size()) return host;
    std::size_t cut = host.size() - suffix.size() - 1;  // dot before suffix
    std::size_t prev = host.rfind('.', cut == 0 ? 0 : cut - 1);
    return prev == std::string::npos ? host : host.substr(prev + 1);
}

inline bool same_registrable_domain(std::string_view a, std::string_view b) {
    return registrable_domain(a) == registrable_domain(b);
}

}  // namespace trackdiff

#endif  // TRACKDIFF_PUBLIC_SUFFIX_HPP_
