#ifndef TRACKDIFF_TRACE_HPP_
#define TRACKDIFF_TRACE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "trackdiff/errors.hpp"
#include "trackdiff/public_suffix.hpp"
#include "trackdiff/url.hpp"

namespace trackdiff {

using json = nlohmann::json;

inline constexpr int kTraceSchemaVersion = 1;

enum class Direction { outgoing, incoming };
enum class Partiness { first, third };
enum class CacheMode { record, replay };
enum class FieldKind { query_param, cookie };
enum class TargetKind { request, field };

// One query-string parameter or cookie of a request.
struct RequestField {
    FieldKind kind = FieldKind::query_param;
    std::string name;
    std::string value;

    bool operator==(const RequestField&) const = default;
};

// What a blocked run had removed: a whole request or a single field of it.
struct TargetRef {
    TargetKind kind = TargetKind::request;
    std::string url_pattern;
    std::optional<RequestField> field;

    bool operator==(const TargetRef&) const = default;
};

struct CaptureMeta {
    std::string page_url;
    int run_index = 0;
    std::optional<TargetRef> blocked_target;
    std::string user_agent;
    int viewport_width = 0;
    int viewport_height = 0;
    CacheMode cache_mode = CacheMode::record;
    double load_time_ms = 0;
};

struct RequestRecord {
    std::string id;
    Direction direction = Direction::outgoing;
    std::string initiator;  // URL or script id
    std::string method;
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::optional<int> response_status;
    std::optional<std::string> response_body;
    std::optional<std::int64_t> response_size;
    double timestamp = 0;
    Partiness partiness = Partiness::first;  // derived from page_url on load

    std::string header(std::string_view name) const {
        std::string lname = to_lower(name);
        for (const auto& [n, v] : headers)
            if (to_lower(n) == lname) return v;
        return {};
    }

    std::string serialized_headers() const {
        std::string out;
        for (const auto& [n, v] : headers) {
            out += n;
            out += ": ";
            out += v;
            out += '\n';
        }
        return out;
    }

    std::vector<RequestField> query_fields() const {
        std::vector<RequestField> out;
        for (const auto& [n, v] : query_params(Url::parse(url)))
            out.push_back({FieldKind::query_param, n, v});
        return out;
    }

    // Cookie-header fields in header order ("a=1; b=2").
    std::vector<RequestField> cookie_fields() const {
        std::vector<RequestField> out;
        std::string cookie = header("Cookie");
        for (const std::string& piece : split(cookie, ';')) {
            std::string_view p = trim(piece);
            if (p.empty()) continue;
            std::size_t eq = p.find('=');
            if (eq == std::string_view::npos)
                out.push_back({FieldKind::cookie, std::string(p), ""});
            else
                out.push_back({FieldKind::cookie, std::string(p.substr(0, eq)),
                               std::string(p.substr(eq + 1))});
        }
        return out;
    }

    std::vector<RequestField> fields() const {
        std::vector<RequestField> out = query_fields();
        std::vector<RequestField> cookies = cookie_fields();
        out.insert(out.end(), cookies.begin(), cookies.end());
        return out;
    }
};

struct DomElement {
    std::string tag;  // one of kDomTags
    double x = 0, y = 0, width = 0, height = 0;
    std::string content_hash;
    std::vector<std::string> css_classes;
    std::map<std::string, std::string> attributes;

    bool operator==(const DomElement&) const = default;
};

inline constexpr std::array<std::string_view, 12> kDomTags = {
    "canvas", "audio", "button", "input", "span", "video",
    "image",  "script", "a",     "iframe", "main", "section"};

struct PageEvent {
    std::string name;
    double timestamp = 0;
};

struct EventListenerRecord {
    std::string event_type;
    bool passive = false;
    bool once = false;
    DomElement target;
    std::string handler_text;
};

struct ScriptRecord {
    std::string text;
    int line = 0;
    int column = 0;
    std::optional<std::string> source_url;
};

struct Appearance {
    std::string screenshot_path;         // relative to the trace file
    std::string second_screenshot_path;  // delayed shot, for the dynamism mask
    std::vector<std::string> fonts;
    std::vector<std::string> colors;
    std::string inner_text;
    std::string main_text;
    std::vector<std::string> css_classes;   // multiset
    std::vector<std::string> tag_sequence;
    std::map<std::string, std::string> regions;  // pre-cropped section shots
};

struct StorageSnapshot {
    std::vector<std::tuple<std::string, std::string, std::string>> cookies;  // name, value, domain
    std::map<std::string, std::string> local;
    std::map<std::string, std::string> session;
};

struct ConsoleEntry {
    std::string level;
    double timestamp = 0;
    std::string source;
    std::string message;
};

struct GraphMetrics {
    int ancestor_eval_count = 0;
    int degree = 0;
    int ancestor_count = 0;
    int fingerprint_api_calls = 0;
};

// One rendering run of one page. Immutable after load.
struct Trace {
    CaptureMeta meta;
    std::vector<RequestRecord> requests;
    std::vector<DomElement> dom;
    std::vector<PageEvent> events;
    std::vector<EventListenerRecord> listeners;
    std::vector<ScriptRecord> scripts;
    Appearance appearance;
    StorageSnapshot storage;
    std::vector<ConsoleEntry> console;
    int ad_count = 0;
    std::map<std::string, GraphMetrics> graph;  // request id -> metrics

    std::filesystem::path dir;  // directory of the trace file; not serialized

    std::filesystem::path resolve(const std::string& rel) const {
        std::filesystem::path p(rel);
        return p.is_absolute() ? p : dir / p;
    }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization. Key order is canonical (nlohmann sorts keys), so
// save(load(f)) re-serializes byte-identically.

namespace detail {

inline const char* to_string(Direction d) { return d == Direction::outgoing ? "outgoing" : "incoming"; }
inline const char* to_string(CacheMode m) { return m == CacheMode::record ? "record" : "replay"; }
inline const char* to_string(FieldKind k) { return k == FieldKind::query_param ? "query_param" : "cookie"; }
inline const char* to_string(TargetKind k) { return k == TargetKind::request ? "request" : "field"; }

template <typename Enum>
Enum enum_from_string(const std::string& s, std::initializer_list<std::pair<const char*, Enum>> table,
                      const std::string& where) {
    for (const auto& [name, value] : table)
        if (s == name) return value;
    throw MalformedTrace(where + ": unknown value '" + s + "'");
}

}  // namespace detail

inline json to_json(const RequestField& f) {
    return json{{"kind", detail::to_string(f.kind)}, {"name", f.name}, {"value", f.value}};
}

inline RequestField field_from_json(const json& j, const std::string& where) {
    RequestField f;
    f.kind = detail::enum_from_string<FieldKind>(
        j.at("kind").get<std::string>(),
        {{"query_param", FieldKind::query_param}, {"cookie", FieldKind::cookie}}, where + ".kind");
    f.name = j.at("name").get<std::string>();
    f.value = j.at("value").get<std::string>();
    if (f.name.empty()) throw MalformedTrace(where + ".name: empty");
    return f;
}

inline json to_json(const TargetRef& t) {
    json j{{"kind", detail::to_string(t.kind)}, {"url_pattern", t.url_pattern}};
    j["field"] = t.field ? to_json(*t.field) : json(nullptr);
    return j;
}

inline TargetRef target_from_json(const json& j, const std::string& where) {
    TargetRef t;
    t.kind = detail::enum_from_string<TargetKind>(
        j.at("kind").get<std::string>(),
        {{"request", TargetKind::request}, {"field", TargetKind::field}}, where + ".kind");
    t.url_pattern = j.at("url_pattern").get<std::string>();
    if (j.contains("field") && !j.at("field").is_null())
        t.field = field_from_json(j.at("field"), where + ".field");
    return t;
}

inline json to_json(const DomElement& e) {
    return json{{"tag", e.tag},
                {"bounds", json::array({e.x, e.y, e.width, e.height})},
                {"content_hash", e.content_hash},
                {"css_classes", e.css_classes},
                {"attributes", e.attributes}};
}

inline DomElement element_from_json(const json& j, const std::string& where) {
    DomElement e;
    e.tag = j.at("tag").get<std::string>();
    bool known = false;
    for (std::string_view t : kDomTags) known = known || t == e.tag;
    if (!known) throw MalformedTrace(where + ".tag: unknown tag '" + e.tag + "'");
    const json& b = j.at("bounds");
    if (!b.is_array() || b.size() != 4) throw MalformedTrace(where + ".bounds: expected [x,y,w,h]");
    e.x = b[0].get<double>();
    e.y = b[1].get<double>();
    e.width = b[2].get<double>();
    e.height = b[3].get<double>();
    e.content_hash = j.value("content_hash", "");
    e.css_classes = j.value("css_classes", std::vector<std::string>{});
    e.attributes = j.value("attributes", std::map<std::string, std::string>{});
    return e;
}

json to_json(const Trace& t);  // below

inline Trace trace_from_json(const json& root, const std::filesystem::path& dir) {
    auto require = [&](const json& j, const char* key, const std::string& where) -> const json& {
        if (!j.contains(key)) throw MalformedTrace(where + ": missing field '" + key + "'");
        return j.at(key);
    };

    if (!root.is_object()) throw MalformedTrace("$: not an object");
    int version = require(root, "schema_version", "$").get<int>();
    if (version != kTraceSchemaVersion)
        throw MalformedTrace("$.schema_version: unsupported version " + std::to_string(version));

    Trace t;
    t.dir = dir;

    const json& m = require(root, "meta", "$");
    t.meta.page_url = require(m, "page_url", "$.meta").get<std::string>();
    t.meta.run_index = m.value("run_index", 0);
    if (m.contains("blocked_target") && !m.at("blocked_target").is_null())
        t.meta.blocked_target = target_from_json(m.at("blocked_target"), "$.meta.blocked_target");
    t.meta.user_agent = require(m, "user_agent", "$.meta").get<std::string>();
    const json& vp = require(m, "viewport", "$.meta");
    t.meta.viewport_width = require(vp, "width", "$.meta.viewport").get<int>();
    t.meta.viewport_height = require(vp, "height", "$.meta.viewport").get<int>();
    if (t.meta.viewport_width <= 0 || t.meta.viewport_height <= 0)
        throw MalformedTrace("$.meta.viewport: components must be positive");
    t.meta.cache_mode = detail::enum_from_string<CacheMode>(
        m.value("cache_mode", "record"),
        {{"record", CacheMode::record}, {"replay", CacheMode::replay}}, "$.meta.cache_mode");
    t.meta.load_time_ms = require(m, "load_time_ms", "$.meta").get<double>();
    if (t.meta.load_time_ms < 0) throw MalformedTrace("$.meta.load_time_ms: negative");

    std::string page_domain = registrable_domain(Url::parse(t.meta.page_url).host);

    double prev_ts = -1e300;
    std::size_t idx = 0;
    for (const json& rj : root.value("requests", json::array())) {
        std::string where = "$.requests[" + std::to_string(idx++) + "]";
        RequestRecord r;
        r.id = require(rj, "id", where).get<std::string>();
        r.direction = detail::enum_from_string<Direction>(
            rj.value("direction", "outgoing"),
            {{"outgoing", Direction::outgoing}, {"incoming", Direction::incoming}}, where + ".direction");
        r.initiator = rj.value("initiator", "");
        r.method = require(rj, "method", where).get<std::string>();
        r.url = require(rj, "url", where).get<std::string>();
        for (const json& h : rj.value("headers", json::array())) {
            if (!h.is_array() || h.size() != 2) throw MalformedTrace(where + ".headers: expected [name, value] pairs");
            r.headers.emplace_back(h[0].get<std::string>(), h[1].get<std::string>());
        }
        r.body = rj.value("body", "");
        if (rj.contains("response_status") && !rj.at("response_status").is_null())
            r.response_status = rj.at("response_status").get<int>();
        if (rj.contains("response_body") && !rj.at("response_body").is_null())
            r.response_body = rj.at("response_body").get<std::string>();
        if (rj.contains("response_size") && !rj.at("response_size").is_null())
            r.response_size = rj.at("response_size").get<std::int64_t>();
        r.timestamp = require(rj, "timestamp", where).get<double>();
        if (r.timestamp < prev_ts) throw MalformedTrace(where + ".timestamp: not monotone");
        prev_ts = r.timestamp;
        r.partiness = registrable_domain(Url::parse(r.url).host) == page_domain
                          ? Partiness::first
                          : Partiness::third;
        t.requests.push_back(std::move(r));
    }

    idx = 0;
    for (const json& ej : root.value("dom", json::array()))
        t.dom.push_back(element_from_json(ej, "$.dom[" + std::to_string(idx++) + "]"));

    prev_ts = -1e300;
    idx = 0;
    for (const json& ej : root.value("events", json::array())) {
        std::string where = "$.events[" + std::to_string(idx++) + "]";
        PageEvent e;
        e.name = require(ej, "name", where).get<std::string>();
        e.timestamp = ej.value("timestamp", 0.0);
        if (e.timestamp < prev_ts) throw MalformedTrace(where + ".timestamp: not monotone");
        prev_ts = e.timestamp;
        t.events.push_back(std::move(e));
    }

    idx = 0;
    for (const json& lj : root.value("listeners", json::array())) {
        std::string where = "$.listeners[" + std::to_string(idx++) + "]";
        EventListenerRecord l;
        l.event_type = require(lj, "event_type", where).get<std::string>();
        l.passive = lj.value("passive", false);
        l.once = lj.value("once", false);
        l.target = element_from_json(require(lj, "target", where), where + ".target");
        l.handler_text = lj.value("handler_text", "");
        t.listeners.push_back(std::move(l));
    }

    idx = 0;
    for (const json& sj : root.value("scripts", json::array())) {
        std::string where = "$.scripts[" + std::to_string(idx++) + "]";
        ScriptRecord s;
        s.text = require(sj, "text", where).get<std::string>();
        const json& pos = sj.value("position", json::array({0, 0}));
        if (!pos.is_array() || pos.size() != 2) throw MalformedTrace(where + ".position: expected [line, column]");
        s.line = pos[0].get<int>();
        s.column = pos[1].get<int>();
        if (sj.contains("source_url") && !sj.at("source_url").is_null())
            s.source_url = sj.at("source_url").get<std::string>();
        t.scripts.push_back(std::move(s));
    }

    const json& ap = root.value("appearance", json::object());
    t.appearance.screenshot_path = ap.value("screenshot_path", "");
    t.appearance.second_screenshot_path = ap.value("second_screenshot_path", "");
    t.appearance.fonts = ap.value("fonts", std::vector<std::string>{});
    t.appearance.colors = ap.value("colors", std::vector<std::string>{});
    t.appearance.inner_text = ap.value("inner_text", "");
    t.appearance.main_text = ap.value("main_text", "");
    t.appearance.css_classes = ap.value("css_classes", std::vector<std::string>{});
    t.appearance.tag_sequence = ap.value("tag_sequence", std::vector<std::string>{});
    t.appearance.regions = ap.value("regions", std::map<std::string, std::string>{});

    const json& st = root.value("storage", json::object());
    for (const json& c : st.value("cookies", json::array())) {
        if (!c.is_array() || c.size() != 3) throw MalformedTrace("$.storage.cookies: expected [name, value, domain] triples");
        t.storage.cookies.emplace_back(c[0].get<std::string>(), c[1].get<std::string>(), c[2].get<std::string>());
    }
    t.storage.local = st.value("local", std::map<std::string, std::string>{});
    t.storage.session = st.value("session", std::map<std::string, std::string>{});

    prev_ts = -1e300;
    idx = 0;
    for (const json& cj : root.value("console", json::array())) {
        std::string where = "$.console[" + std::to_string(idx++) + "]";
        ConsoleEntry c;
        c.level = require(cj, "level", where).get<std::string>();
        c.timestamp = cj.value("timestamp", 0.0);
        if (c.timestamp < prev_ts) throw MalformedTrace(where + ".timestamp: not monotone");
        prev_ts = c.timestamp;
        c.source = cj.value("source", "");
        c.message = require(cj, "message", where).get<std::string>();
        t.console.push_back(std::move(c));
    }

    t.ad_count = root.value("ad_count", 0);
    if (t.ad_count < 0) throw MalformedTrace("$.ad_count: negative");

    json graph_json = root.value("graph", json::object());
    for (const auto& [key, gj] : graph_json.items()) {
        GraphMetrics g;
        g.ancestor_eval_count = gj.value("ancestor_eval_count", 0);
        g.degree = gj.value("degree", 0);
        g.ancestor_count = gj.value("ancestor_count", 0);
        g.fingerprint_api_calls = gj.value("fingerprint_api_calls", 0);
        if (g.ancestor_eval_count < 0 || g.degree < 0 || g.ancestor_count < 0 || g.fingerprint_api_calls < 0)
            throw MalformedTrace("$.graph['" + key + "']: negative count");
        bool found = false;
        for (const RequestRecord& r : t.requests) found = found || r.id == key;
        if (!found) throw DanglingReference("$.graph['" + key + "']: no request with this id");
        t.graph[key] = g;
    }

    return t;
}

inline json to_json(const Trace& t) {
    json root;
    root["schema_version"] = kTraceSchemaVersion;

    json m;
    m["page_url"] = t.meta.page_url;
    m["run_index"] = t.meta.run_index;
    m["blocked_target"] = t.meta.blocked_target ? to_json(*t.meta.blocked_target) : json(nullptr);
    m["user_agent"] = t.meta.user_agent;
    m["viewport"] = json{{"width", t.meta.viewport_width}, {"height", t.meta.viewport_height}};
    m["cache_mode"] = detail::to_string(t.meta.cache_mode);
    m["load_time_ms"] = t.meta.load_time_ms;
    root["meta"] = std::move(m);

    root["requests"] = json::array();
    for (const RequestRecord& r : t.requests) {
        json rj;
        rj["id"] = r.id;
        rj["direction"] = detail::to_string(r.direction);
        rj["initiator"] = r.initiator;
        rj["method"] = r.method;
        rj["url"] = r.url;
        json headers = json::array();
        for (const auto& [n, v] : r.headers) headers.push_back(json::array({n, v}));
        rj["headers"] = std::move(headers);
        rj["body"] = r.body;
        rj["response_status"] = r.response_status ? json(*r.response_status) : json(nullptr);
        rj["response_body"] = r.response_body ? json(*r.response_body) : json(nullptr);
        rj["response_size"] = r.response_size ? json(*r.response_size) : json(nullptr);
        rj["timestamp"] = r.timestamp;
        root["requests"].push_back(std::move(rj));
    }

    root["dom"] = json::array();
    for (const DomElement& e : t.dom) root["dom"].push_back(to_json(e));

    root["events"] = json::array();
    for (const PageEvent& e : t.events)
        root["events"].push_back(json{{"name", e.name}, {"timestamp", e.timestamp}});

    root["listeners"] = json::array();
    for (const EventListenerRecord& l : t.listeners)
        root["listeners"].push_back(json{{"event_type", l.event_type},
                                         {"passive", l.passive},
                                         {"once", l.once},
                                         {"target", to_json(l.target)},
                                         {"handler_text", l.handler_text}});

    root["scripts"] = json::array();
    for (const ScriptRecord& s : t.scripts) {
        json sj{{"text", s.text}, {"position", json::array({s.line, s.column})}};
        sj["source_url"] = s.source_url ? json(*s.source_url) : json(nullptr);
        root["scripts"].push_back(std::move(sj));
    }

    json ap;
    ap["screenshot_path"] = t.appearance.screenshot_path;
    ap["second_screenshot_path"] = t.appearance.second_screenshot_path;
    ap["fonts"] = t.appearance.fonts;
    ap["colors"] = t.appearance.colors;
    ap["inner_text"] = t.appearance.inner_text;
    ap["main_text"] = t.appearance.main_text;
    ap["css_classes"] = t.appearance.css_classes;
    ap["tag_sequence"] = t.appearance.tag_sequence;
    ap["regions"] = t.appearance.regions;
    root["appearance"] = std::move(ap);

    json st;
    st["cookies"] = json::array();
    for (const auto& [n, v, d] : t.storage.cookies) st["cookies"].push_back(json::array({n, v, d}));
    st["local"] = t.storage.local;
    st["session"] = t.storage.session;
    root["storage"] = std::move(st);

    root["console"] = json::array();
    for (const ConsoleEntry& c : t.console)
        root["console"].push_back(json{{"level", c.level},
                                       {"timestamp", c.timestamp},
                                       {"source", c.source},
                                       {"message", c.message}});

    root["ad_count"] = t.ad_count;

    json graph = json::object();
    for (const auto& [key, g] : t.graph)
        graph[key] = json{{"ancestor_eval_count", g.ancestor_eval_count},
                          {"degree", g.degree},
                          {"ancestor_count", g.ancestor_count},
                          {"fingerprint_api_calls", g.fingerprint_api_calls}};
    root["graph"] = std::move(graph);

    return root;
}

// Loading is reentrant; the returned Trace is safe to share across threads.
inline Trace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MalformedTrace(path.string() + ": cannot open");
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw MalformedTrace(path.string() + ": " + e.what());
    }
    try {
        return trace_from_json(root, path.parent_path());
    } catch (const json::exception& e) {
        throw MalformedTrace(path.string() + ": " + e.what());
    }
}

inline void save_trace(const Trace& t, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(path.string() + ": cannot write");
    out << to_json(t).dump(2) << '\n';
}

// ---------------------------------------------------------------------------

// Re-derives partiness from the page URL; load_trace does this itself,
// programmatically built traces call it once after assembly.
inline void recompute_partiness(Trace& t) {
    std::string page_domain = registrable_domain(Url::parse(t.meta.page_url).host);
    for (RequestRecord& r : t.requests)
        r.partiness = registrable_domain(Url::parse(r.url).host) == page_domain
                          ? Partiness::first
                          : Partiness::third;
}

// Checks that two runs were captured in the same environment, so that a diff
// between them is attributable to the blocked target alone.
inline std::vector<std::string> validate_pairing(const Trace& vanilla, const Trace& blocked) {
    std::vector<std::string> mismatches;
    if (vanilla.meta.page_url != blocked.meta.page_url) mismatches.push_back("page_url");
    if (vanilla.meta.user_agent != blocked.meta.user_agent) mismatches.push_back("user_agent");
    if (vanilla.meta.viewport_width != blocked.meta.viewport_width ||
        vanilla.meta.viewport_height != blocked.meta.viewport_height)
        mismatches.push_back("viewport");
    if (!blocked.meta.blocked_target) mismatches.push_back("blocked_target");
    return mismatches;
}

struct CandidateFilter {
    bool scripts = true;        // requests whose response looks like JavaScript
    bool parameterized = true;  // requests with at least one query parameter
};

inline bool fetches_script(const RequestRecord& r) {
    // Capture tools record the response MIME under "Content-Type" when known.
    std::string ct = to_lower(r.header("Content-Type"));
    if (ct.find("javascript") != std::string::npos || ct.find("ecmascript") != std::string::npos)
        return true;
    std::string path = to_lower(Url::parse(r.url).path);
    return path.ends_with(".js") || path.ends_with(".mjs");
}

// The candidate surface: outgoing requests fetching script or carrying
// query parameters, in trace order.
inline std::vector<RequestRecord> enumerate_requests(const Trace& t,
                                                     const CandidateFilter& filter = {}) {
    std::vector<RequestRecord> out;
    for (const RequestRecord& r : t.requests) {
        if (r.direction != Direction::outgoing) continue;
        bool is_script = filter.scripts && fetches_script(r);
        bool has_params = filter.parameterized && !query_params(Url::parse(r.url)).empty();
        if (is_script || has_params) out.push_back(r);
    }
    return out;
}

// True when `target` names this request: exact URL for request targets;
// for field targets the request must also carry the named field.
inline bool target_matches(const TargetRef& target, const RequestRecord& r) {
    if (r.url != target.url_pattern) return false;
    if (target.kind == TargetKind::field) {
        if (!target.field) return false;
        for (const RequestField& f : r.fields())
            if (f.kind == target.field->kind && f.name == target.field->name) return true;
        return false;
    }
    return true;
}

}  // namespace trackdiff

#endif  // TRACKDIFF_TRACE_HPP_
