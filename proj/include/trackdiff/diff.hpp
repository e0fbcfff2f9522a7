#ifndef TRACKDIFF_DIFF_HPP_
#define TRACKDIFF_DIFF_HPP_

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "trackdiff/errors.hpp"
#include "trackdiff/image.hpp"
#include "trackdiff/text_similarity.hpp"
#include "trackdiff/trace.hpp"

namespace trackdiff {

// ---------------------------------------------------------------------------
// Entity matchers

struct DiffConfig {
    double request_similarity_threshold = 0.95;
    double element_class_jaccard = 0.8;
    double element_iou = 0.5;
    double script_similarity_threshold = 0.95;
    int pixel_tolerance = kDefaultPixelTolerance;
    // Pluggable appearance embedder; null means the built-in pooled-grid one.
    std::function<std::vector<float>(const std::filesystem::path&, const DynamismMask&)> embedder;

    // Bundled lexicons, overridable per run.
    std::vector<std::string> ad_keywords = {
        "ad",     "ads",       "advert",  "banner",      "track",    "pixel",
        "beacon", "analytics", "sponsor", "doubleclick", "adsystem", "tagmanager"};
    std::vector<std::string> fingerprint_apis = {
        "toDataURL",           "getImageData", "measureText",   "AudioContext",
        "enumerateDevices",    "getBattery",   "hardwareConcurrency",
        "deviceMemory",        "maxTouchPoints"};
    // Element sizes commonly used for ad slots (width, height).
    std::vector<std::pair<int, int>> ad_sizes = {
        {300, 250}, {728, 90}, {160, 600}, {320, 50}, {300, 600},
        {970, 250}, {336, 280}, {468, 60}, {234, 60}, {120, 600}};
};

// Session noise (cache busters, rotating ids) must not make the same
// logical request look like two. Two requests are the same when initiator
// and method are identical and URL, serialized headers and body each clear
// the cosine-similarity threshold.
inline bool requests_match(const RequestRecord& a, const RequestRecord& b,
                           const DiffConfig& cfg = {}) {
    if (a.initiator != b.initiator || a.method != b.method) return false;
    if (a.direction != b.direction) return false;
    const double t = cfg.request_similarity_threshold;
    if (text_similarity(a.url, b.url) <= t) return false;
    if (text_similarity(a.serialized_headers(), b.serialized_headers()) <= t) return false;
    return text_similarity(a.body, b.body) > t;
}

struct RequestAlignment {
    std::vector<std::pair<std::size_t, std::size_t>> matched;  // indices into A, B
    std::vector<std::size_t> a_only;
    std::vector<std::size_t> b_only;
};

// Greedy one-to-one matching in timestamp order: each A request takes the
// first unmatched B request it fuzz-matches; earlier timestamps win.
inline RequestAlignment align_requests(const std::vector<RequestRecord>& a,
                                       const std::vector<RequestRecord>& b,
                                       const DiffConfig& cfg = {}) {
    RequestAlignment out;
    std::vector<std::size_t> order_a(a.size()), order_b(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) order_a[i] = i;
    for (std::size_t i = 0; i < b.size(); ++i) order_b[i] = i;
    std::stable_sort(order_a.begin(), order_a.end(),
                     [&](std::size_t l, std::size_t r) { return a[l].timestamp < a[r].timestamp; });
    std::stable_sort(order_b.begin(), order_b.end(),
                     [&](std::size_t l, std::size_t r) { return b[l].timestamp < b[r].timestamp; });

    std::vector<char> taken(b.size(), 0);
    for (std::size_t ia : order_a) {
        bool found = false;
        for (std::size_t ib : order_b) {
            if (taken[ib]) continue;
            if (requests_match(a[ia], b[ib], cfg)) {
                taken[ib] = 1;
                out.matched.emplace_back(ia, ib);
                found = true;
                break;
            }
        }
        if (!found) out.a_only.push_back(ia);
    }
    for (std::size_t ib = 0; ib < b.size(); ++ib)
        if (!taken[ib]) out.b_only.push_back(ib);
    return out;
}

inline double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t inter = 0;
    for (const std::string& s : sa) inter += sb.count(s);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

inline double bounds_iou(const DomElement& a, const DomElement& b) {
    double ax2 = a.x + a.width, ay2 = a.y + a.height;
    double bx2 = b.x + b.width, by2 = b.y + b.height;
    double iw = std::min(ax2, bx2) - std::max(a.x, b.x);
    double ih = std::min(ay2, by2) - std::max(a.y, b.y);
    double inter = std::max(0.0, iw) * std::max(0.0, ih);
    double uni = a.width * a.height + b.width * b.height - inter;
    if (uni <= 0) return (a.x == b.x && a.y == b.y && a.width == b.width && a.height == b.height) ? 1.0 : 0.0;
    return inter / uni;
}

// Structural + stylistic match; content hashes are session-specific and
// deliberately ignored.
inline bool elements_match(const DomElement& a, const DomElement& b, const DiffConfig& cfg = {}) {
    if (a.tag != b.tag) return false;
    if (jaccard(a.css_classes, b.css_classes) < cfg.element_class_jaccard) return false;
    return bounds_iou(a, b) >= cfg.element_iou;
}

// Listener identity: event type, target element and the handler byte-for-byte.
inline bool listeners_equal(const EventListenerRecord& a, const EventListenerRecord& b,
                            const DiffConfig& cfg = {}) {
    if (a.event_type != b.event_type) return false;
    if (!elements_match(a.target, b.target, cfg)) return false;
    return a.handler_text == b.handler_text;
}

inline double script_similarity(const ScriptRecord& a, const ScriptRecord& b) {
    return cosine_of_counts(code_tokens(a.text), code_tokens(b.text));
}

// ---------------------------------------------------------------------------
// Raw and consensus diffs

// One differential record. Scalars hold named per-pair measurements;
// items hold set-valued changes keyed by content (never by capture ids,
// which differ between runs).
struct DiffItem {
    std::string kind;
    json payload;
};

struct RawDiff {
    std::map<std::string, double> scalars;
    std::map<std::string, DiffItem> items;
    std::set<std::string> components;  // which of the ten trace components were diffed
    std::optional<TargetRef> target;
};

inline const std::set<std::string>& all_components() {
    static const std::set<std::string> names = {
        "requests", "dom",     "events",  "listeners", "scripts",
        "appearance", "storage", "console", "adcount",   "graph"};
    return names;
}

struct ConsensusDiff {
    struct VotedItem {
        DiffItem item;
        int count = 0;  // occurrences over the k^2 pairs
    };
    std::map<std::string, double> scalars;
    std::map<std::string, VotedItem> items;
    std::set<std::string> components;
    std::optional<TargetRef> target;
    int k = 1;
    int pair_count = 1;
    double vote_agreement = 1.0;  // mean fraction of pairs behind each voted scalar

    int count_items(std::string_view kind) const {
        int n = 0;
        for (const auto& [key, voted] : items)
            if (voted.item.kind == kind) ++n;
        return n;
    }
};

// Scalar voting granularity: values are quantized before the mode vote so
// that float jitter does not split buckets.
inline double scalar_granularity(std::string_view key) {
    if (key.starts_with("sim.") || key.starts_with("ratio.")) return 1e-4;
    if (key.starts_with("ms.")) return 10.0;
    if (key.starts_with("px.")) return 4.0;
    return 1.0;  // counts, lengths, byte sizes
}

namespace detail {

inline void count_scalar(RawDiff& d, const std::string& key, double value) {
    d.scalars[key] = value;
}

inline std::string fields_key(const RequestRecord& r) {
    return r.method + "|" + r.url;
}

// Stable content keys for set items; duplicates get ordinal suffixes.
inline void add_items(RawDiff& d, const std::string& kind,
                      std::vector<std::pair<std::string, json>> entries) {
    std::map<std::string, int> seen;
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [base, payload] : entries) {
        int ordinal = seen[base]++;
        std::string key = kind + ":" + base;
        if (ordinal > 0) key += "#" + std::to_string(ordinal);
        d.items[key] = DiffItem{kind, std::move(payload)};
    }
}

inline std::string element_key(const DomElement& e) {
    std::string classes;
    std::vector<std::string> sorted = e.css_classes;
    std::sort(sorted.begin(), sorted.end());
    for (const std::string& c : sorted) classes += c + ",";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "|%.0f,%.0f,%.0f,%.0f|", e.x, e.y, e.width, e.height);
    return e.tag + buf + classes;
}

inline std::string listener_key(const EventListenerRecord& l) {
    return l.event_type + "|" + l.target.tag + "|" + fnv1a64_hex(l.handler_text);
}

inline int storage_value_occurrences(const RequestRecord& r, const std::vector<std::string>& values) {
    int n = 0;
    std::string blob = r.url + "\n" + r.serialized_headers() + "\n" + r.body;
    for (const std::string& v : values)
        if (v.size() >= 6 && blob.find(v) != std::string::npos) ++n;
    return n;
}

inline std::vector<std::string> storage_values(const Trace& t) {
    std::vector<std::string> out;
    for (const auto& [name, value, domain] : t.storage.cookies) out.push_back(value);
    for (const auto& [k, v] : t.storage.local) out.push_back(v);
    for (const auto& [k, v] : t.storage.session) out.push_back(v);
    return out;
}

inline json listener_payload(const EventListenerRecord& l) {
    return json{{"event_type", l.event_type},
                {"tag", l.target.tag},
                {"passive", l.passive},
                {"once", l.once},
                {"handler_hash", fnv1a64_hex(l.handler_text)}};
}

inline bool is_css_request(const RequestRecord& r) {
    std::string ct = to_lower(r.header("Content-Type"));
    if (ct.find("text/css") != std::string::npos) return true;
    return to_lower(Url::parse(r.url).path).ends_with(".css");
}

inline const GraphMetrics* graph_for(const Trace& t, const std::string& request_id) {
    auto it = t.graph.find(request_id);
    return it == t.graph.end() ? nullptr : &it->second;
}

inline int size_class_count(const Trace& t, std::string_view tag, int cls,
                            const std::vector<std::pair<int, int>>& ad_sizes) {
    // cls: 0 small (area < 10), 1 large, 2 sensitive (matches an ad slot size)
    int n = 0;
    for (const DomElement& e : t.dom) {
        if (e.tag != tag) continue;
        bool small = e.width * e.height < 10.0;
        bool sensitive = false;
        for (const auto& [w, h] : ad_sizes)
            sensitive = sensitive ||
                        (static_cast<int>(e.width) == w && static_cast<int>(e.height) == h);
        if (cls == 0 && small) ++n;
        if (cls == 1 && !small) ++n;
        if (cls == 2 && sensitive) ++n;
    }
    return n;
}

inline int tag_count(const Trace& t, std::string_view tag) {
    int n = 0;
    for (const DomElement& e : t.dom) n += e.tag == tag;
    return n;
}

}  // namespace detail

// Finds the request a target names inside a trace; nullptr when absent.
inline const RequestRecord* find_target_request(const Trace& t, const TargetRef& target) {
    for (const RequestRecord& r : t.requests)
        if (target_matches(target, r)) return &r;
    // Tolerate a volatile query tail: unique prefix match on scheme://host/path.
    std::string base = target.url_pattern.substr(0, target.url_pattern.find('?'));
    const RequestRecord* found = nullptr;
    for (const RequestRecord& r : t.requests) {
        if (r.url.substr(0, r.url.find('?')) == base) {
            if (found) return nullptr;  // ambiguous
            found = &r;
        }
    }
    return found;
}

// Compares one vanilla run against one blocked run, producing the raw
// differential for all ten trace components.
inline RawDiff diff_pair(const Trace& vanilla, const Trace& blocked, const DiffConfig& cfg = {}) {
    {
        std::vector<std::string> mismatches = validate_pairing(vanilla, blocked);
        // The blocked_target requirement is pipeline policy, not a pairing
        // defect: self-diffs and hand-built pairs are legal here.
        std::erase(mismatches, "blocked_target");
        if (!mismatches.empty()) {
            std::string what = "pairing mismatch:";
            for (const std::string& m : mismatches) what += " " + m;
            throw PairingMismatch(what);
        }
    }

    RawDiff d;
    d.components = all_components();
    d.target = blocked.meta.blocked_target;

    std::string page_domain = registrable_domain(Url::parse(vanilla.meta.page_url).host);
    std::vector<std::string> vanilla_storage = detail::storage_values(vanilla);

    // --- requests ---------------------------------------------------------
    RequestAlignment alignment = align_requests(vanilla.requests, blocked.requests, cfg);

    // The target's two sides. A field-stripped request can drop below the
    // fuzzy-match threshold; fall back to host+path identity so it still
    // counts as modified rather than removed-plus-added.
    const RequestRecord* ta = d.target ? find_target_request(vanilla, *d.target) : nullptr;
    const RequestRecord* tb = nullptr;
    if (ta) {
        for (const auto& [ia, ib] : alignment.matched)
            if (&vanilla.requests[ia] == ta) tb = &blocked.requests[ib];
        if (!tb && d.target->kind == TargetKind::field)
            tb = find_target_request(blocked, TargetRef{TargetKind::request, ta->url, std::nullopt});
    }

    {
        std::vector<std::pair<std::string, json>> removed, added;
        for (std::size_t ia : alignment.a_only) {
            const RequestRecord& r = vanilla.requests[ia];
            if (&r == ta && tb) continue;  // modified in place, not removed
            json payload = {{"method", r.method},
                            {"url", r.url},
                            {"direction", detail::to_string(r.direction)},
                            {"partiness", r.partiness == Partiness::first ? "first" : "third"},
                            {"storage_values", detail::storage_value_occurrences(r, vanilla_storage)}};
            removed.emplace_back(detail::fields_key(r), std::move(payload));
        }
        for (std::size_t ib : alignment.b_only) {
            const RequestRecord& r = blocked.requests[ib];
            if (&r == tb) continue;
            json payload = {{"method", r.method},
                            {"url", r.url},
                            {"direction", detail::to_string(r.direction)},
                            {"partiness", r.partiness == Partiness::first ? "first" : "third"},
                            {"storage_values", 0}};
            added.emplace_back(detail::fields_key(r), std::move(payload));
        }
        detail::add_items(d, "req_removed", std::move(removed));
        detail::add_items(d, "req_added", std::move(added));
        detail::count_scalar(d, "n.requests_matched", static_cast<double>(alignment.matched.size()));
        detail::count_scalar(d, "n.requests_vanilla", static_cast<double>(vanilla.requests.size()));

        int css_a = 0, css_b = 0;
        for (const RequestRecord& r : vanilla.requests) css_a += detail::is_css_request(r);
        for (const RequestRecord& r : blocked.requests) css_b += detail::is_css_request(r);
        detail::count_scalar(d, "n.css_files_delta", css_a - css_b);
    }

    // --- blocked-target measurements ---------------------------------------
    if (d.target) {
        const TargetRef& target = *d.target;
        detail::count_scalar(d, "n.target_in_vanilla", ta ? 1.0 : 0.0);
        if (ta) {

            auto count_params = [](const RequestRecord& r) {
                return static_cast<double>(r.fields().size());
            };
            auto fp_occurrences = [&](const RequestRecord& r) {
                std::string blob = r.url + "\n" + r.serialized_headers() + "\n" + r.body;
                return static_cast<double>(count_occurrences(blob, page_domain));
            };
            auto eval_count = [](const RequestRecord& r) {
                return r.response_body ? static_cast<double>(count_occurrences(*r.response_body, "eval"))
                                       : 0.0;
            };
            auto resp_size = [](const RequestRecord& r) {
                return r.response_size ? static_cast<double>(*r.response_size) : 0.0;
            };

            detail::count_scalar(d, "n.target_param_delta",
                                 count_params(*ta) - (tb ? count_params(*tb) : 0.0));
            detail::count_scalar(d, "len.target_url_delta",
                                 static_cast<double>(ta->url.size()) -
                                     (tb ? static_cast<double>(tb->url.size()) : 0.0));
            detail::count_scalar(d, "bytes.target_resp_size_delta",
                                 resp_size(*ta) - (tb ? resp_size(*tb) : 0.0));
            detail::count_scalar(d, "n.target_fp_occurrence_delta",
                                 fp_occurrences(*ta) - (tb ? fp_occurrences(*tb) : 0.0));
            detail::count_scalar(d, "n.target_resp_eval_delta",
                                 eval_count(*ta) - (tb ? eval_count(*tb) : 0.0));

            const GraphMetrics* ga = detail::graph_for(vanilla, ta->id);
            const GraphMetrics* gb = tb ? detail::graph_for(blocked, tb->id) : nullptr;
            auto gdelta = [&](auto member) {
                double va = ga ? static_cast<double>(ga->*member) : 0.0;
                double vb = gb ? static_cast<double>(gb->*member) : 0.0;
                return va - vb;
            };
            detail::count_scalar(d, "n.target_fp_api_delta", gdelta(&GraphMetrics::fingerprint_api_calls));
            detail::count_scalar(d, "n.target_ancestor_eval_delta", gdelta(&GraphMetrics::ancestor_eval_count));
            detail::count_scalar(d, "n.target_degree_delta", gdelta(&GraphMetrics::degree));
            detail::count_scalar(d, "n.target_ancestor_count_delta", gdelta(&GraphMetrics::ancestor_count));

            // Requests gone from the blocked run that the target names: the
            // directly blocked set used by the breakage-side request features.
            std::vector<const RequestRecord*> gone;
            for (std::size_t ia : alignment.a_only) {
                const RequestRecord& r = vanilla.requests[ia];
                if (&r == ta && tb) continue;
                if (r.direction == Direction::outgoing && target_matches(target, r)) gone.push_back(&r);
            }
            double outgoing_total = 0;
            for (const RequestRecord& r : vanilla.requests) outgoing_total += r.direction == Direction::outgoing;

            double url_len = 0, params = 0, dims = 0, semis = 0, screens = 0, fp_occ = 0;
            double fp_req = 0, tp_req = 0, ad_kw = 0, storage_out = 0, api_static = 0, evals = 0;
            double resp_total = 0, sensitive_fp = 0, sensitive_tp = 0;
            for (const RequestRecord* r : gone) {
                url_len += static_cast<double>(r->url.size());
                params += static_cast<double>(r->fields().size());
                std::string low = to_lower(r->url);
                // dimension-like tokens, e.g. 300x250
                for (std::size_t i = 0; i + 2 < low.size(); ++i) {
                    if (low[i] == 'x' && i > 0 && std::isdigit(static_cast<unsigned char>(low[i - 1])) &&
                        std::isdigit(static_cast<unsigned char>(low[i + 1]))) {
                        dims += 1;
                        break;
                    }
                }
                semis += static_cast<double>(std::count(r->url.begin(), r->url.end(), ';'));
                screens += count_occurrences(low, "screen");
                fp_occ += count_occurrences(r->url + "\n" + r->serialized_headers() + "\n" + r->body,
                                            page_domain);
                fp_req += r->partiness == Partiness::first;
                tp_req += r->partiness == Partiness::third;
                TokenCounts url_tokens = text_tokens(low);
                for (const std::string& kw : cfg.ad_keywords) {
                    auto it = url_tokens.find(kw);
                    if (it != url_tokens.end()) ad_kw += it->second;
                }
                int sv = detail::storage_value_occurrences(*r, vanilla_storage);
                storage_out += sv;
                if (r->response_body) {
                    for (const std::string& api : cfg.fingerprint_apis)
                        api_static += count_occurrences(*r->response_body, api);
                    evals += count_occurrences(*r->response_body, "eval");
                }
                resp_total += r->response_size ? static_cast<double>(*r->response_size) : 0.0;
                if (sv > 0) {
                    sensitive_fp += r->partiness == Partiness::first;
                    sensitive_tp += r->partiness == Partiness::third;
                }
            }
            detail::count_scalar(d, "n.blocked_by_target", static_cast<double>(gone.size()));
            detail::count_scalar(d, "ratio.blocked_pct",
                                 outgoing_total > 0 ? gone.size() / outgoing_total : 0.0);
            detail::count_scalar(d, "len.blocked_url_total", url_len);
            detail::count_scalar(d, "n.blocked_param_total", params);
            detail::count_scalar(d, "n.blocked_ad_dimension", dims);
            detail::count_scalar(d, "n.blocked_semicolon", semis);
            detail::count_scalar(d, "n.blocked_screen", screens);
            detail::count_scalar(d, "n.blocked_fp_occurrences", fp_occ);
            detail::count_scalar(d, "n.blocked_first_party", fp_req);
            detail::count_scalar(d, "n.blocked_third_party", tp_req);
            detail::count_scalar(d, "n.blocked_ad_keywords", ad_kw);
            detail::count_scalar(d, "n.blocked_storage_values_out", storage_out);
            detail::count_scalar(d, "n.blocked_fp_api_static", api_static);
            detail::count_scalar(d, "n.blocked_eval", evals);
            detail::count_scalar(d, "bytes.blocked_resp_total", resp_total);
            detail::count_scalar(d, "bytes.blocked_resp_avg",
                                 gone.empty() ? 0.0 : resp_total / static_cast<double>(gone.size()));
            detail::count_scalar(d, "n.blocked_sensitive_fp", sensitive_fp);
            detail::count_scalar(d, "n.blocked_sensitive_tp", sensitive_tp);
        }
    }

    // --- DOM elements -------------------------------------------------------
    {
        std::vector<char> taken(blocked.dom.size(), 0);
        std::vector<std::pair<std::string, json>> removed, added;
        for (const DomElement& ea : vanilla.dom) {
            bool found = false;
            for (std::size_t ib = 0; ib < blocked.dom.size(); ++ib) {
                if (taken[ib]) continue;
                if (elements_match(ea, blocked.dom[ib], cfg)) {
                    taken[ib] = 1;
                    found = true;
                    break;
                }
            }
            if (!found) removed.emplace_back(detail::element_key(ea), to_json(ea));
        }
        for (std::size_t ib = 0; ib < blocked.dom.size(); ++ib)
            if (!taken[ib]) added.emplace_back(detail::element_key(blocked.dom[ib]), to_json(blocked.dom[ib]));
        detail::add_items(d, "elem_removed", std::move(removed));
        detail::add_items(d, "elem_added", std::move(added));

        for (std::string_view tag : {"canvas", "audio", "button", "input", "a", "script", "span"})
            detail::count_scalar(d, "n.dom_" + std::string(tag) + "_delta",
                                 detail::tag_count(vanilla, tag) - detail::tag_count(blocked, tag));
        for (std::string_view tag : {"video", "image", "iframe"}) {
            for (int cls = 0; cls < 3; ++cls) {
                static const char* cls_name[] = {"small", "large", "sensitive"};
                detail::count_scalar(
                    d, "n.dom_" + std::string(tag) + "_" + cls_name[cls] + "_delta",
                    detail::size_class_count(vanilla, tag, cls, cfg.ad_sizes) -
                        detail::size_class_count(blocked, tag, cls, cfg.ad_sizes));
            }
        }
        auto ads_iframes = [](const Trace& t) {
            int n = 0;
            for (const DomElement& e : t.dom) {
                if (e.tag != "iframe") continue;
                auto it = e.attributes.find("text");
                if (it == e.attributes.end() || it->second.empty()) ++n;
            }
            return n;
        };
        detail::count_scalar(d, "n.dom_ads_iframes_delta", ads_iframes(vanilla) - ads_iframes(blocked));
    }

    // --- events --------------------------------------------------------------
    {
        auto event_count = [](const Trace& t, std::string_view name) {
            int n = 0;
            for (const PageEvent& e : t.events) n += e.name == name;
            return n;
        };
        detail::count_scalar(d, "n.before_unload_delta",
                             event_count(vanilla, "Window.before_unload") -
                                 event_count(blocked, "Window.before_unload"));
        detail::count_scalar(d, "n.downloads_delta",
                             event_count(vanilla, "downloadWillBegin") -
                                 event_count(blocked, "downloadWillBegin"));
    }

    // --- listeners -------------------------------------------------------------
    {
        std::vector<char> taken(blocked.listeners.size(), 0);
        std::vector<std::pair<std::string, json>> removed, added;
        for (const EventListenerRecord& la : vanilla.listeners) {
            bool found = false;
            for (std::size_t ib = 0; ib < blocked.listeners.size(); ++ib) {
                if (taken[ib]) continue;
                if (listeners_equal(la, blocked.listeners[ib], cfg)) {
                    taken[ib] = 1;
                    found = true;
                    break;
                }
            }
            if (!found) removed.emplace_back(detail::listener_key(la), detail::listener_payload(la));
        }
        for (std::size_t ib = 0; ib < blocked.listeners.size(); ++ib)
            if (!taken[ib])
                added.emplace_back(detail::listener_key(blocked.listeners[ib]),
                                   detail::listener_payload(blocked.listeners[ib]));
        detail::add_items(d, "listener_removed", std::move(removed));
        detail::add_items(d, "listener_added", std::move(added));
    }

    // --- scripts ----------------------------------------------------------------
    {
        std::vector<char> taken(blocked.scripts.size(), 0);
        std::vector<std::pair<std::string, json>> removed, added;
        for (const ScriptRecord& sa : vanilla.scripts) {
            bool found = false;
            for (std::size_t ib = 0; ib < blocked.scripts.size(); ++ib) {
                if (taken[ib]) continue;
                if (script_similarity(sa, blocked.scripts[ib]) > cfg.script_similarity_threshold) {
                    taken[ib] = 1;
                    found = true;
                    break;
                }
            }
            if (!found)
                removed.emplace_back(fnv1a64_hex(sa.text),
                                     json{{"source_url", sa.source_url ? json(*sa.source_url) : json(nullptr)},
                                          {"hash", fnv1a64_hex(sa.text)}});
        }
        for (std::size_t ib = 0; ib < blocked.scripts.size(); ++ib) {
            if (taken[ib]) continue;
            const ScriptRecord& sb = blocked.scripts[ib];
            added.emplace_back(fnv1a64_hex(sb.text),
                               json{{"source_url", sb.source_url ? json(*sb.source_url) : json(nullptr)},
                                    {"hash", fnv1a64_hex(sb.text)}});
        }
        detail::add_items(d, "script_removed", std::move(removed));
        detail::add_items(d, "script_added", std::move(added));
    }

    // --- appearance ----------------------------------------------------------------
    {
        const Appearance& aa = vanilla.appearance;
        const Appearance& ab = blocked.appearance;

        DynamismMask mask;
        if (!aa.screenshot_path.empty() && !aa.second_screenshot_path.empty())
            mask = mask_union(mask, dynamism_mask(vanilla.resolve(aa.screenshot_path),
                                                  vanilla.resolve(aa.second_screenshot_path),
                                                  cfg.pixel_tolerance));
        if (!ab.screenshot_path.empty() && !ab.second_screenshot_path.empty())
            mask = mask_union(mask, dynamism_mask(blocked.resolve(ab.screenshot_path),
                                                  blocked.resolve(ab.second_screenshot_path),
                                                  cfg.pixel_tolerance));

        auto embed = [&](const Trace& t, const std::string& rel, const DynamismMask& m) {
            if (cfg.embedder) return cfg.embedder(t.resolve(rel), m);
            return embed_screenshot(t.resolve(rel), m);
        };
        auto shot_similarity = [&](const std::string& rel_a, const std::string& rel_b,
                                   const DynamismMask& m) {
            if (rel_a.empty() && rel_b.empty()) return 1.0;
            if (rel_a.empty() || rel_b.empty()) return 0.0;
            return embedding_cosine(embed(vanilla, rel_a, m), embed(blocked, rel_b, m));
        };

        detail::count_scalar(d, "sim.embedding",
                             shot_similarity(aa.screenshot_path, ab.screenshot_path, mask));
        for (std::string_view region : {"vips", "cormer", "main", "section"}) {
            std::string key(region);
            auto ia = aa.regions.find(key);
            auto ib = ab.regions.find(key);
            double sim;
            if (ia == aa.regions.end() && ib == ab.regions.end())
                sim = 1.0;
            else if (ia == aa.regions.end() || ib == ab.regions.end())
                sim = 0.0;
            else
                sim = shot_similarity(ia->second, ib->second, DynamismMask{});
            detail::count_scalar(d, "sim.region_" + key, sim);
        }

        detail::count_scalar(d, "sim.text", text_similarity(aa.inner_text, ab.inner_text));
        detail::count_scalar(d, "sim.main_text", text_similarity(aa.main_text, ab.main_text));

        auto multiset_of = [](const std::vector<std::string>& v) {
            TokenCounts counts;
            for (const std::string& s : v) ++counts[s];
            return counts;
        };
        TokenCounts style_a = multiset_of(aa.css_classes), style_b = multiset_of(ab.css_classes);
        TokenCounts tags_a = multiset_of(aa.tag_sequence), tags_b = multiset_of(ab.tag_sequence);
        detail::count_scalar(d, "sim.style", cosine_of_counts(style_a, style_b));
        detail::count_scalar(d, "sim.structure", cosine_of_counts(tags_a, tags_b));
        // Joint style+structure: one vector over both token spaces.
        TokenCounts joint_a, joint_b;
        for (const auto& [t, c] : style_a) joint_a["class:" + t] = c;
        for (const auto& [t, c] : tags_a) joint_a["tag:" + t] = c;
        for (const auto& [t, c] : style_b) joint_b["class:" + t] = c;
        for (const auto& [t, c] : tags_b) joint_b["tag:" + t] = c;
        detail::count_scalar(d, "sim.html", cosine_of_counts(joint_a, joint_b));

        auto set_delta = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
            std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
            int n = 0;
            for (const std::string& s : sa) n += !sb.count(s);
            for (const std::string& s : sb) n += !sa.count(s);
            return n;
        };
        detail::count_scalar(d, "n.font_delta", set_delta(aa.fonts, ab.fonts));
        detail::count_scalar(d, "n.color_delta", set_delta(aa.colors, ab.colors));

        double height_a = 0, height_b = 0;
        if (!aa.screenshot_path.empty())
            height_a = load_png_gray(vanilla.resolve(aa.screenshot_path)).height;
        if (!ab.screenshot_path.empty())
            height_b = load_png_gray(blocked.resolve(ab.screenshot_path)).height;
        detail::count_scalar(d, "px.height_delta", height_a - height_b);
    }

    // --- storage ---------------------------------------------------------------------
    {
        std::vector<std::pair<std::string, json>> entries;
        std::map<std::pair<std::string, std::string>, std::string> cook_a, cook_b;
        for (const auto& [n, v, dom] : vanilla.storage.cookies) cook_a[{n, dom}] = v;
        for (const auto& [n, v, dom] : blocked.storage.cookies) cook_b[{n, dom}] = v;
        for (const auto& [key, v] : cook_a) {
            auto it = cook_b.find(key);
            if (it == cook_b.end() || it->second != v)
                entries.emplace_back("cook:" + key.first + "|" + key.second,
                                     json{{"name", key.first}, {"domain", key.second}});
        }
        for (const auto& [key, v] : cook_b)
            if (!cook_a.count(key))
                entries.emplace_back("cook:" + key.first + "|" + key.second,
                                     json{{"name", key.first}, {"domain", key.second}});
        detail::add_items(d, "cookie_delta", std::move(entries));

        auto map_delta = [&](const std::map<std::string, std::string>& a,
                             const std::map<std::string, std::string>& b, const std::string& kind,
                             const std::string& prefix) {
            std::vector<std::pair<std::string, json>> changed;
            for (const auto& [k, v] : a) {
                auto it = b.find(k);
                if (it == b.end() || it->second != v)
                    changed.emplace_back(prefix + k, json{{"key", k}});
            }
            for (const auto& [k, v] : b)
                if (!a.count(k)) changed.emplace_back(prefix + k, json{{"key", k}});
            detail::add_items(d, kind, std::move(changed));
        };
        map_delta(vanilla.storage.local, blocked.storage.local, "local_delta", "loc:");
        map_delta(vanilla.storage.session, blocked.storage.session, "session_delta", "ses:");
    }

    // --- console ----------------------------------------------------------------------
    {
        TokenCounts msgs_a, msgs_b;
        for (const ConsoleEntry& c : vanilla.console) ++msgs_a[c.level + "|" + c.message];
        for (const ConsoleEntry& c : blocked.console) ++msgs_b[c.level + "|" + c.message];
        std::vector<std::pair<std::string, json>> removed, added;
        for (const auto& [key, count_a] : msgs_a) {
            int count_b = msgs_b.count(key) ? msgs_b.at(key) : 0;
            for (int i = count_b; i < count_a; ++i)
                removed.emplace_back(key + "#" + std::to_string(i), json{{"entry", key}});
        }
        for (const auto& [key, count_b] : msgs_b) {
            int count_a = msgs_a.count(key) ? msgs_a.at(key) : 0;
            for (int i = count_a; i < count_b; ++i)
                added.emplace_back(key + "#" + std::to_string(i), json{{"entry", key}});
        }
        detail::add_items(d, "console_removed", std::move(removed));
        detail::add_items(d, "console_added", std::move(added));
    }

    // --- load time, ads, graph totals ----------------------------------------------------
    detail::count_scalar(d, "ms.load_time_delta", vanilla.meta.load_time_ms - blocked.meta.load_time_ms);
    detail::count_scalar(d, "n.ad_count_delta", vanilla.ad_count - blocked.ad_count);
    {
        auto totals = [](const Trace& t) {
            std::pair<double, double> out{0, 0};  // fingerprint calls, ancestor evals
            for (const auto& [id, g] : t.graph) {
                out.first += g.fingerprint_api_calls;
                out.second += g.ancestor_eval_count;
            }
            return out;
        };
        auto [fp_a, ev_a] = totals(vanilla);
        auto [fp_b, ev_b] = totals(blocked);
        detail::count_scalar(d, "n.graph_fp_api_total_delta", fp_a - fp_b);
        detail::count_scalar(d, "n.graph_ancestor_eval_total_delta", ev_a - ev_b);
    }

    return d;
}

// Majority-votes k^2 pairwise diffs into one consensus diff. Scalars take
// the per-key mode after quantization, ties resolved toward the value
// nearest zero (no change). Set items survive only with a strict majority.
inline ConsensusDiff consensus(const std::vector<RawDiff>& diffs, int k) {
    if (k < 1 || diffs.size() != static_cast<std::size_t>(k) * static_cast<std::size_t>(k))
        throw WrongPairCount("expected k^2 = " + std::to_string(k * k) + " diffs, got " +
                             std::to_string(diffs.size()));

    ConsensusDiff out;
    out.k = k;
    out.pair_count = k * k;

    for (const RawDiff& d : diffs) {
        out.components.insert(d.components.begin(), d.components.end());
        if (!out.target && d.target) out.target = d.target;
    }

    std::set<std::string> scalar_keys;
    for (const RawDiff& d : diffs)
        for (const auto& [key, value] : d.scalars) scalar_keys.insert(key);

    double agreement_sum = 0;
    for (const std::string& key : scalar_keys) {
        double g = scalar_granularity(key);
        std::map<long long, int> votes;
        for (const RawDiff& d : diffs) {
            auto it = d.scalars.find(key);
            double v = it == d.scalars.end() ? 0.0 : it->second;
            ++votes[static_cast<long long>(std::llround(v / g))];
        }
        long long best_bucket = 0;
        int best_count = -1;
        for (const auto& [bucket, count] : votes) {
            if (count > best_count) {
                best_bucket = bucket;
                best_count = count;
            } else if (count == best_count) {
                long long babs = std::llabs(bucket), cabs = std::llabs(best_bucket);
                if (babs < cabs || (babs == cabs && bucket < best_bucket)) best_bucket = bucket;
            }
        }
        out.scalars[key] = static_cast<double>(best_bucket) * g;
        agreement_sum += static_cast<double>(best_count) / static_cast<double>(out.pair_count);
    }
    out.vote_agreement = scalar_keys.empty() ? 1.0 : agreement_sum / static_cast<double>(scalar_keys.size());

    std::map<std::string, ConsensusDiff::VotedItem> tally;
    for (const RawDiff& d : diffs) {
        for (const auto& [key, item] : d.items) {
            auto [it, inserted] = tally.try_emplace(key, ConsensusDiff::VotedItem{item, 0});
            ++it->second.count;
            if (!inserted) {
                // Payloads can differ across pairs (timestamps and the like);
                // keep the lexicographically smallest for order independence.
                if (item.payload.dump() < it->second.item.payload.dump()) it->second.item = item;
            }
        }
    }
    for (auto& [key, voted] : tally)
        if (voted.count * 2 > out.pair_count) out.items.emplace(key, std::move(voted));

    return out;
}

}  // namespace trackdiff

#endif  // TRACKDIFF_DIFF_HPP_
