#ifndef TRACKDIFF_FEATURES_HPP_
#define TRACKDIFF_FEATURES_HPP_

#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "trackdiff/diff.hpp"
#include "trackdiff/errors.hpp"

namespace trackdiff {

enum class FeatureGroup { appearance, input, request, storage_temporal, tracking };

inline const char* to_string(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::appearance: return "appearance";
        case FeatureGroup::input: return "input";
        case FeatureGroup::request: return "request";
        case FeatureGroup::storage_temporal: return "storage_temporal";
        case FeatureGroup::tracking: return "tracking";
    }
    return "?";
}

// Element/event lexicons behind the listener category features.
// Bundled defaults, overridable per run.
struct FeatureConfig {
    std::set<std::string> specific_tags = {"button", "a", "input"};  // interactable
    std::set<std::string> generic_tags = {"span", "main", "section", "canvas",
                                          "audio", "video", "image", "iframe", "script"};
    std::set<std::string> sensitive_tags = {"input", "canvas"};
    std::set<std::string> critical_tags = {"button", "a"};
    std::set<std::string> functionality_event_types = {
        "click", "submit", "input", "change", "keydown", "keyup", "touchstart", "scroll"};
};

struct FeatureDef {
    std::string name;
    FeatureGroup group;
    std::string alias;  // importance-table name, when the feature has one
};

enum class RegistryKind { breakage, tracking };

class FeatureRegistry {
public:
    using Extractor = std::function<double(const ConsensusDiff&, const FeatureConfig&)>;

    FeatureRegistry(std::string id, std::vector<std::pair<FeatureDef, Extractor>> entries)
        : id_(std::move(id)) {
        defs_.reserve(entries.size());
        extractors_.reserve(entries.size());
        for (auto& [def, fn] : entries) {
            defs_.push_back(std::move(def));
            extractors_.push_back(std::move(fn));
        }
    }

    const std::string& id() const { return id_; }
    std::size_t size() const { return defs_.size(); }
    const FeatureDef& at(std::size_t i) const { return defs_[i]; }
    const std::vector<FeatureDef>& defs() const { return defs_; }

    int index_of(std::string_view name) const {
        for (std::size_t i = 0; i < defs_.size(); ++i)
            if (defs_[i].name == name) return static_cast<int>(i);
        return -1;
    }
    int index_of_alias(std::string_view alias) const {
        for (std::size_t i = 0; i < defs_.size(); ++i)
            if (!defs_[i].alias.empty() && defs_[i].alias == alias) return static_cast<int>(i);
        return -1;
    }

    double extract(std::size_t i, const ConsensusDiff& diff, const FeatureConfig& cfg) const {
        return extractors_[i](diff, cfg);
    }

    // Audit export: index,name,group per line, header row included.
    std::string to_csv() const {
        std::string out = "index,name,group\n";
        for (std::size_t i = 0; i < defs_.size(); ++i) {
            out += std::to_string(i) + ",\"" + defs_[i].name + "\"," +
                   to_string(defs_[i].group) + "\n";
        }
        return out;
    }

private:
    std::string id_;
    std::vector<FeatureDef> defs_;
    std::vector<Extractor> extractors_;
};

struct FeatureVector {
    std::vector<double> values;
    std::string registry_id;
};

namespace detail {

inline double sc(const ConsensusDiff& d, const std::string& key) {
    auto it = d.scalars.find(key);
    return it == d.scalars.end() ? 0.0 : it->second;
}

inline int listener_items(const ConsensusDiff& d,
                          const std::function<bool(const json&)>& pred) {
    int n = 0;
    for (const auto& [key, voted] : d.items) {
        if (voted.item.kind != "listener_removed" && voted.item.kind != "listener_added") continue;
        if (pred(voted.item.payload)) ++n;
    }
    return n;
}

inline int request_items(const ConsensusDiff& d, const char* kind,
                         const std::function<bool(const json&)>& pred) {
    int n = 0;
    for (const auto& [key, voted] : d.items) {
        if (voted.item.kind != kind) continue;
        if (pred(voted.item.payload)) ++n;
    }
    return n;
}

inline FeatureRegistry build_breakage_registry() {
    using D = FeatureDef;
    using G = FeatureGroup;
    std::vector<std::pair<FeatureDef, FeatureRegistry::Extractor>> e;

    auto dissim = [](const char* key) {
        return [key](const ConsensusDiff& d, const FeatureConfig&) { return 1.0 - sc(d, key); };
    };
    auto abs_scalar = [](const char* key) {
        return [key](const ConsensusDiff& d, const FeatureConfig&) { return std::abs(sc(d, key)); };
    };
    auto raw_scalar = [](const char* key) {
        return [key](const ConsensusDiff& d, const FeatureConfig&) { return sc(d, key); };
    };
    auto item_count = [](const char* kind) {
        return [kind](const ConsensusDiff& d, const FeatureConfig&) {
            return static_cast<double>(d.count_items(kind));
        };
    };
    auto listeners_in = [](std::set<std::string> FeatureConfig::*tags) {
        return [tags](const ConsensusDiff& d, const FeatureConfig& cfg) {
            return static_cast<double>(listener_items(d, [&](const json& p) {
                return (cfg.*tags).count(p.value("tag", ""));
            }));
        };
    };

    // Appearance (33)
    e.push_back({D{"VIPS screenshot", G::appearance, ""}, dissim("sim.region_vips")});
    e.push_back({D{"Cormer screenshot", G::appearance, ""}, dissim("sim.region_cormer")});
    e.push_back({D{"Main screenshot", G::appearance, ""}, dissim("sim.region_main")});
    e.push_back({D{"Section screenshot", G::appearance, ""}, dissim("sim.region_section")});
    e.push_back({D{"Feature vectors", G::appearance, "delta full-paged screenshot as a feature vector"},
                 dissim("sim.embedding")});
    e.push_back({D{"Text", G::appearance, ""}, dissim("sim.text")});
    e.push_back({D{"Readability text", G::appearance, ""}, dissim("sim.main_text")});
    e.push_back({D{"Document style", G::appearance, "delta CSS classes"}, dissim("sim.style")});
    e.push_back({D{"Structure similarity", G::appearance, "delta HTML tag sequences"},
                 dissim("sim.structure")});
    e.push_back({D{"HTML", G::appearance, "delta DOM tree"}, dissim("sim.html")});
    e.push_back({D{"Fonts", G::appearance, ""}, abs_scalar("n.font_delta")});
    e.push_back({D{"Color", G::appearance, ""}, abs_scalar("n.color_delta")});
    e.push_back({D{"Height", G::appearance, "delta document height"}, abs_scalar("px.height_delta")});
    e.push_back({D{"Canvas", G::appearance, ""}, abs_scalar("n.dom_canvas_delta")});
    e.push_back({D{"Audio", G::appearance, ""}, abs_scalar("n.dom_audio_delta")});
    e.push_back({D{"Button", G::appearance, ""}, abs_scalar("n.dom_button_delta")});
    e.push_back({D{"Input", G::appearance, ""}, abs_scalar("n.dom_input_delta")});
    e.push_back({D{"Links", G::appearance, ""}, abs_scalar("n.dom_a_delta")});
    e.push_back({D{"Dom scripts", G::appearance, ""}, abs_scalar("n.dom_script_delta")});
    e.push_back({D{"Span", G::appearance, ""}, abs_scalar("n.dom_span_delta")});
    e.push_back({D{"Unloaded diff", G::appearance, ""}, abs_scalar("n.before_unload_delta")});
    e.push_back({D{"CSS files", G::appearance, ""}, abs_scalar("n.css_files_delta")});
    e.push_back({D{"Videos small", G::appearance, ""}, abs_scalar("n.dom_video_small_delta")});
    e.push_back({D{"Videos large", G::appearance, ""}, abs_scalar("n.dom_video_large_delta")});
    e.push_back({D{"Video sensitive size", G::appearance, ""}, abs_scalar("n.dom_video_sensitive_delta")});
    e.push_back({D{"Images small", G::appearance, ""}, abs_scalar("n.dom_image_small_delta")});
    e.push_back({D{"Images large", G::appearance, ""}, abs_scalar("n.dom_image_large_delta")});
    e.push_back({D{"Images sensitive size", G::appearance, ""}, abs_scalar("n.dom_image_sensitive_delta")});
    e.push_back({D{"Iframes small", G::appearance, ""}, abs_scalar("n.dom_iframe_small_delta")});
    e.push_back({D{"Iframes large", G::appearance, ""}, abs_scalar("n.dom_iframe_large_delta")});
    e.push_back({D{"Iframes sensitive size", G::appearance, ""}, abs_scalar("n.dom_iframe_sensitive_delta")});
    e.push_back({D{"Ads iframes", G::appearance, ""}, abs_scalar("n.dom_ads_iframes_delta")});
    e.push_back({D{"Ad highlighter", G::appearance, ""}, abs_scalar("n.ad_count_delta")});

    // Input handling (6)
    e.push_back({D{"Specific listeners", G::input, "delta listeners on interactable elements"},
                 listeners_in(&FeatureConfig::specific_tags)});
    e.push_back({D{"Generic listeners", G::input, ""}, listeners_in(&FeatureConfig::generic_tags)});
    e.push_back({D{"Sensitive listeners", G::input, ""}, listeners_in(&FeatureConfig::sensitive_tags)});
    e.push_back({D{"Critical listeners", G::input, ""}, listeners_in(&FeatureConfig::critical_tags)});
    e.push_back({D{"Functionality related listeners", G::input, ""},
                 [](const ConsensusDiff& d, const FeatureConfig& cfg) {
                     return static_cast<double>(listener_items(d, [&](const json& p) {
                         return cfg.functionality_event_types.count(p.value("event_type", ""));
                     }));
                 }});
    e.push_back({D{"Listeners", G::input, "delta event listeners"},
                 [](const ConsensusDiff& d, const FeatureConfig&) {
                     return static_cast<double>(d.count_items("listener_removed") +
                                                d.count_items("listener_added"));
                 }});

    // Requests (18)
    e.push_back({D{"# requests blocked", G::request, ""}, raw_scalar("n.blocked_by_target")});
    e.push_back({D{"% requests blocked", G::request, ""}, raw_scalar("ratio.blocked_pct")});
    e.push_back({D{"URL length", G::request, ""}, raw_scalar("len.blocked_url_total")});
    e.push_back({D{"Total parameters", G::request, ""}, raw_scalar("n.blocked_param_total")});
    e.push_back({D{"Ad dimensions", G::request, ""}, raw_scalar("n.blocked_ad_dimension")});
    e.push_back({D{"# semicolon", G::request, ""}, raw_scalar("n.blocked_semicolon")});
    e.push_back({D{"# screen", G::request, ""}, raw_scalar("n.blocked_screen")});
    e.push_back({D{"# FP in blocked requests", G::request, ""}, raw_scalar("n.blocked_fp_occurrences")});
    e.push_back({D{"# FP req blocked", G::request, ""}, raw_scalar("n.blocked_first_party")});
    e.push_back({D{"# TP req blocked", G::request, ""}, raw_scalar("n.blocked_third_party")});
    e.push_back({D{"# ad keywords", G::request, ""}, raw_scalar("n.blocked_ad_keywords")});
    e.push_back({D{"# storage values out", G::request, ""}, raw_scalar("n.blocked_storage_values_out")});
    e.push_back({D{"API static", G::request, ""}, raw_scalar("n.blocked_fp_api_static")});
    e.push_back({D{"Eval keyword", G::request, ""}, raw_scalar("n.blocked_eval")});
    e.push_back({D{"Total response size", G::request, ""}, raw_scalar("bytes.blocked_resp_total")});
    e.push_back({D{"Avg response size", G::request, ""}, raw_scalar("bytes.blocked_resp_avg")});
    e.push_back({D{"Sensitive FP", G::request, ""}, raw_scalar("n.blocked_sensitive_fp")});
    e.push_back({D{"Sensitive TP", G::request, ""}, raw_scalar("n.blocked_sensitive_tp")});

    // Storage, temporal performance, device interface (6)
    e.push_back({D{"Storage", G::storage_temporal, ""}, item_count("local_delta")});
    e.push_back({D{"Session storage", G::storage_temporal, ""}, item_count("session_delta")});
    e.push_back({D{"Cookies", G::storage_temporal, "delta cookies values"}, item_count("cookie_delta")});
    e.push_back({D{"Load time", G::storage_temporal, "delta page load time"},
                 [](const ConsensusDiff& d, const FeatureConfig&) {
                     return std::abs(sc(d, "ms.load_time_delta")) / 1000.0;
                 }});
    e.push_back({D{"Logs", G::storage_temporal, "delta console logs"},
                 [](const ConsensusDiff& d, const FeatureConfig&) {
                     return static_cast<double>(d.count_items("console_removed") +
                                                d.count_items("console_added"));
                 }});
    e.push_back({D{"Downloads", G::storage_temporal, ""}, abs_scalar("n.downloads_delta")});

    return FeatureRegistry("breakage-v1", std::move(e));
}

inline FeatureRegistry build_tracking_registry() {
    using D = FeatureDef;
    constexpr FeatureGroup G = FeatureGroup::tracking;
    std::vector<std::pair<FeatureDef, FeatureRegistry::Extractor>> e;

    auto raw_scalar = [](const char* key) {
        return [key](const ConsensusDiff& d, const FeatureConfig&) { return sc(d, key); };
    };
    auto outgoing = [](const json& p) { return p.value("direction", "") == "outgoing"; };

    e.push_back({D{"Blocked request parameters", G, "delta parameters of the blocked request"},
                 raw_scalar("n.target_param_delta")});
    e.push_back({D{"Blocked request URL length", G, "delta URL length of the blocked request"},
                 raw_scalar("len.target_url_delta")});
    e.push_back({D{"Blocked request response size", G, "delta response size of the blocked request"},
                 raw_scalar("bytes.target_resp_size_delta")});
    e.push_back({D{"First party occurrences", G, "delta times first party appear in the blocked request"},
                 raw_scalar("n.target_fp_occurrence_delta")});
    e.push_back({D{"Response eval count", G, "delta 'eval' appear in the response of the blocked request"},
                 raw_scalar("n.target_resp_eval_delta")});
    e.push_back({D{"Fingerprint calls", G, "delta high entropy fingerprinting function executed"},
                 raw_scalar("n.target_fp_api_delta")});
    e.push_back({D{"Third party requests blocked", G, "delta third party requests blocked"},
                 [outgoing](const ConsensusDiff& d, const FeatureConfig&) {
                     return static_cast<double>(request_items(d, "req_removed", [&](const json& p) {
                         return outgoing(p) && p.value("partiness", "") == "third";
                     }));
                 }});
    e.push_back({D{"Requests blocked", G, "delta requests blocked"},
                 [outgoing](const ConsensusDiff& d, const FeatureConfig&) {
                     return static_cast<double>(request_items(d, "req_removed", outgoing));
                 }});
    e.push_back({D{"Sensitive third party blocked", G,
                   "delta third party requests with sensitive information"},
                 [outgoing](const ConsensusDiff& d, const FeatureConfig&) {
                     return static_cast<double>(request_items(d, "req_removed", [&](const json& p) {
                         return outgoing(p) && p.value("partiness", "") == "third" &&
                                p.value("storage_values", 0) > 0;
                     }));
                 }});
    e.push_back({D{"Ancestor eval count", G, "delta 'eval' in the ancestors nodes of the blocked request"},
                 raw_scalar("n.target_ancestor_eval_delta")});

    // Category-derived remainder. The importance table pins only the ten
    // entries above; these document the DOM-state, data-flow and control-
    // flow categories the detector also draws on.
    e.push_back({D{"Listener delta", G, ""},
                 [](const ConsensusDiff& d, const FeatureConfig&) {
                     return static_cast<double>(d.count_items("listener_removed") +
                                                d.count_items("listener_added"));
                 }});
    e.push_back({D{"DOM element delta", G, ""},
                 [](const ConsensusDiff& d, const FeatureConfig&) {
                     return static_cast<double>(d.count_items("elem_removed") +
                                                d.count_items("elem_added"));
                 }});
    e.push_back({D{"Storage flow count", G, ""},
                 [outgoing](const ConsensusDiff& d, const FeatureConfig&) {
                     double n = 0;
                     for (const auto& [key, voted] : d.items)
                         if (voted.item.kind == "req_removed" && outgoing(voted.item.payload))
                             n += voted.item.payload.value("storage_values", 0);
                     return n;
                 }});
    e.push_back({D{"Fingerprint calls total", G, ""}, raw_scalar("n.graph_fp_api_total_delta")});

    return FeatureRegistry("tracking-v1", std::move(e));
}

}  // namespace detail

// Stable registries; ordering is frozen within a schema version.
inline const FeatureRegistry& registry(RegistryKind kind) {
    static const FeatureRegistry breakage = detail::build_breakage_registry();
    static const FeatureRegistry tracking = detail::build_tracking_registry();
    return kind == RegistryKind::breakage ? breakage : tracking;
}

namespace detail {
inline FeatureVector extract_all(const FeatureRegistry& reg, const ConsensusDiff& diff,
                                 const FeatureConfig& cfg) {
    FeatureVector v;
    v.registry_id = reg.id();
    v.values.reserve(reg.size());
    for (std::size_t i = 0; i < reg.size(); ++i) {
        double x = reg.extract(i, diff, cfg);
        if (!std::isfinite(x)) x = 0.0;
        v.values.push_back(x);
    }
    return v;
}
}  // namespace detail

// The 63-dimension breakage vector. Requires a diff covering all ten
// trace components.
inline FeatureVector breakage_vector(const ConsensusDiff& diff, const FeatureConfig& cfg = {}) {
    for (const std::string& component : all_components())
        if (!diff.components.contains(component))
            throw IncompleteDiff("diff is missing component: " + component);
    return detail::extract_all(registry(RegistryKind::breakage), diff, cfg);
}

// The tracking vector for one blocked target. The diff must have been
// built with this target and the target must exist in the vanilla trace.
inline FeatureVector tracking_vector(const ConsensusDiff& diff, const TargetRef& target,
                                     const FeatureConfig& cfg = {}) {
    if (!diff.target || !(*diff.target == target))
        throw UnknownTarget("diff was not built for this target: " + target.url_pattern);
    if (detail::sc(diff, "n.target_in_vanilla") < 0.5)
        throw UnknownTarget("target not present in the vanilla trace: " + target.url_pattern);
    return detail::extract_all(registry(RegistryKind::tracking), diff, cfg);
}

}  // namespace trackdiff

#endif  // TRACKDIFF_FEATURES_HPP_
