#ifndef TRACKDIFF_TRACE_SYNTH_HPP_
#define TRACKDIFF_TRACE_SYNTH_HPP_

// Synthetic page-rendering traces. Stands in for the external capture
// tool: writes complete job directories (vanilla runs, blocked runs,
// targets.json) whose differential behavior is known by construction,
// so detector training and end-to-end assertions need no live browser.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "trackdiff/filter_rules.hpp"
#include "trackdiff/image.hpp"
#include "trackdiff/pipeline.hpp"
#include "trackdiff/trace.hpp"

namespace trackdiff::synth {

namespace fs = std::filesystem;

inline std::string hex_token(const std::string& key, std::size_t len) {
    std::string out;
    int i = 0;
    while (out.size() < len) out += fnv1a64_hex(key + "#" + std::to_string(i++));
    return out.substr(0, len);
}

inline std::string digit_token(const std::string& key, std::size_t len) {
    std::string hex = hex_token(key, len * 2);
    std::string out;
    for (char c : hex) {
        if (out.size() == len) break;
        out += static_cast<char>('0' + (static_cast<unsigned char>(c) % 10));
    }
    return out;
}

enum class Archetype {
    pure_tracker,       // third-party tracker script plus beacon; clean removal
    benign_asset,       // inert first-party utility script
    functional_script,  // tracking-looking third-party script the page needs
    exception_breakage, // functional CDN resource covered by an exception rule
    mixed_request,      // one request carrying tracking and functional fields
    probabilistic_noise,// pure tracker plus a sometimes-there survey dialog
    empty_page,
};

struct JobPlan {
    Archetype archetype = Archetype::pure_tracker;
    std::string page_host;                  // job directory name
    std::string third_host;                 // tracker / CDN host where used
    std::string rec_path = "cdn/widgets/recommend/loader/v2/1/0/recommend.min.js";
    bool content_style_breakage = false;    // appearance/text-only breakage variant
    bool with_cookie_fields = false;        // mixed_request: add cookie fields
    bool write_target_runs = true;          // blocked/<target_id>/ capture directories
    int k = 3;
    int site_rank = 100;
    std::string seed = "0";
};

struct PlannedTarget {
    std::string id;
    TargetRef ref;
};

// ---------------------------------------------------------------------------
// screenshot painting

namespace detail {

inline void fill_rect(GrayImage& img, int x, int y, int w, int h, std::uint8_t shade) {
    for (int yy = y; yy < y + h && yy < img.height; ++yy)
        for (int xx = x; xx < x + w && xx < img.width; ++xx)
            if (xx >= 0 && yy >= 0) img.at(xx, yy) = shade;
}

inline GrayImage crop(const GrayImage& img, int y0, int y1) {
    GrayImage out;
    out.width = img.width;
    out.height = y1 - y0;
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
    for (int y = y0; y < y1; ++y)
        for (int x = 0; x < img.width; ++x) out.at(x, y - y0) = img.at(x, y);
    return out;
}

inline DomElement element(const std::string& tag, double x, double y, double w, double h,
                          std::vector<std::string> classes,
                          std::map<std::string, std::string> attributes = {}) {
    DomElement e;
    e.tag = tag;
    e.x = x;
    e.y = y;
    e.width = w;
    e.height = h;
    e.css_classes = std::move(classes);
    e.attributes = std::move(attributes);
    e.content_hash = fnv1a64_hex(tag + std::to_string(x) + std::to_string(y));
    return e;
}

inline EventListenerRecord listener(const std::string& event_type, const DomElement& target,
                                    const std::string& handler) {
    EventListenerRecord l;
    l.event_type = event_type;
    l.target = target;
    l.handler_text = handler;
    return l;
}

inline RequestRecord request(const std::string& id, const std::string& initiator,
                             const std::string& url, double ts, const std::string& mime,
                             const std::string& response, std::int64_t size) {
    RequestRecord r;
    r.id = id;
    r.direction = Direction::outgoing;
    r.initiator = initiator;
    r.method = "GET";
    r.url = url;
    if (!mime.empty()) r.headers.emplace_back("Content-Type", mime);
    r.response_status = 200;
    r.response_body = response;
    r.response_size = size;
    r.timestamp = ts;
    return r;
}

}  // namespace detail

// What a blocked run removes or strips.
struct BlockAction {
    std::optional<TargetRef> target;  // absent for vanilla runs
};

struct JobArtifacts {
    std::vector<PlannedTarget> targets;
    std::optional<std::string> exception_rule;  // exception_breakage archetype
    std::string targets_mode = "request";
};

namespace detail {

struct PageText {
    std::string inner = "spring sale on guitars amps pedals today free shipping over fifty";
    std::string main = "spring sale on guitars";
};

// Builds one run's trace for a plan. `blocked` describes the removal this
// run was captured with; screenshots land next to `out_dir/trace.json`.
inline Trace build_trace(const JobPlan& plan, int run, const BlockAction& blocked,
                         const fs::path& out_dir) {
    const std::string page = plan.page_host;
    const std::string page_url = "https://" + page + "/";
    const std::string third = plan.third_host;
    const std::string job_seed = plan.seed + "|" + page;

    Trace t;
    t.dir = out_dir;
    t.meta.page_url = page_url;
    t.meta.run_index = run;
    t.meta.blocked_target = blocked.target;
    t.meta.user_agent = "Mozilla/5.0 (X11; Linux x86_64) SynthCapture/1.0";
    t.meta.viewport_width = 1280;
    t.meta.viewport_height = 800;
    t.meta.cache_mode = CacheMode::replay;
    t.meta.load_time_ms = 1200;

    GrayImage shot;
    shot.width = 128;
    shot.height = 256;
    shot.pixels.assign(static_cast<std::size_t>(shot.width) * shot.height, 230);

    if (plan.archetype != Archetype::empty_page) {
        detail::fill_rect(shot, 0, 0, 128, 20, 200);    // header
        detail::fill_rect(shot, 0, 20, 128, 20, 150);   // nav
        detail::fill_rect(shot, 0, 40, 128, 80, 90);    // main content
        detail::fill_rect(shot, 0, 240, 128, 16, 180);  // footer

        int rid = 0;
        auto next_id = [&]() { return "r" + std::to_string(++rid); };

        t.requests.push_back(detail::request(next_id(), "navigation", page_url, 10, "text/html",
                                             "<!doctype html><html><body>shop</body></html>", 3500));
        t.requests.push_back(detail::request(next_id(), page_url,
                                             "https://" + page + "/static/css/site.css", 20,
                                             "text/css", "body{margin:0}", 900));
        t.requests.push_back(detail::request(next_id(), page_url, "https://" + page + "/img/hero.png",
                                             30, "image/png", "", 4800));
        std::string app_url = "https://" + page +
                              "/static/assets/js/vendor/bundle/app/main/core/v2/1/0/app.min.js"
                              "?build=2024&rev=81&cb=" +
                              hex_token(job_seed + "|cb|" + std::to_string(run), 8);
        t.requests.push_back(detail::request(next_id(), page_url, app_url, 40,
                                             "application/javascript",
                                             "function boot(){wire();render();}", 2600));
        t.graph[t.requests.back().id] = GraphMetrics{0, 2, 1, 0};

        DomElement main_el = detail::element("main", 0, 0, 1280, 2000, {"page"});
        DomElement hero_section = detail::element("section", 0, 40, 1280, 400, {"hero"});
        DomElement buy = detail::element("button", 40, 480, 160, 48, {"buy"});
        DomElement info = detail::element("button", 240, 480, 160, 48, {"info"});
        DomElement search = detail::element("input", 40, 20, 300, 32, {"search"});
        DomElement title = detail::element("span", 40, 60, 400, 40, {"title"}, {{"text", "spring sale"}});
        DomElement hero_img = detail::element("image", 0, 40, 1280, 400, {"hero-img"});
        t.dom = {main_el, hero_section, buy, info, search, title, hero_img};

        t.listeners = {detail::listener("click", buy, "function(){cart.add()}"),
                       detail::listener("click", info, "function(){panel.open()}"),
                       detail::listener("input", search, "function(e){suggest(e)}")};

        t.scripts.push_back({"function boot(){wire();render();}", 1, 0,
                             std::optional<std::string>(app_url)});

        t.appearance.fonts = {"Arial", "Roboto"};
        t.appearance.colors = {"#000000", "#ffffff", "#3366cc"};
        t.appearance.css_classes = {"page", "hero", "buy", "info", "search", "title", "hero-img"};
        t.appearance.tag_sequence = {"main", "section", "button", "button", "input", "span", "image"};

        t.storage.local["theme"] = "dark";
        t.storage.cookies.emplace_back("consent", "1", page);

        t.console.push_back({"info", 100, "app", "app ready"});
        t.events.push_back({"loadComplete", 900});
    }

    PageText text;

    // --- archetype layers ---------------------------------------------------
    auto blocked_matches = [&](const std::string& url) {
        return blocked.target && blocked.target->kind == TargetKind::request &&
               blocked.target->url_pattern == url;
    };

    if (plan.archetype == Archetype::pure_tracker || plan.archetype == Archetype::probabilistic_noise) {
        std::string uid = hex_token(job_seed + "|uid", 16);
        std::string trk_url = "https://" + third + "/lib/analytics/collect/pixel/tag/v3/2/1/tracker.min.js";
        std::string beacon_url = "https://" + third + "/b/collect?uid=" + uid + "&ref=" + page +
                                 "&sw=1280x800&screen=1";
        if (!blocked_matches(trk_url)) {
            RequestRecord trk = detail::request(
                "rt1", page_url, trk_url, 50, "application/javascript",
                "var q=eval('window');function fp(){return c.toDataURL()+navigator.hardwareConcurrency}"
                "eval(q);send(fp());",
                14000);
            t.requests.push_back(trk);
            t.graph["rt1"] = GraphMetrics{2, 4, 3, 3};

            RequestRecord beacon = detail::request("rt2", trk_url, beacon_url, 60, "image/gif", "", 43);
            beacon.headers.emplace_back("Cookie", "uid=" + uid);
            t.requests.push_back(beacon);
            t.graph["rt2"] = GraphMetrics{0, 2, 5, 0};

            t.dom.push_back(detail::element("iframe", 900, 600, 300, 250, {"ad-slot"}));
            t.storage.cookies.emplace_back("uid", uid, third);
            t.ad_count = 1;
        }
        if (plan.archetype == Archetype::probabilistic_noise && !blocked.target && run == 1) {
            // A survey dialog that appears on a minority of visits.
            DomElement dialog = detail::element("section", 200, 300, 600, 300, {"survey-dialog"});
            t.dom.push_back(dialog);
            t.listeners.push_back(detail::listener("click", dialog, "function(){survey.close()}"));
            t.console.push_back({"info", 800, "survey", "survey shown"});
            t.appearance.css_classes.push_back("survey-dialog");
            t.appearance.tag_sequence.push_back("section");
            detail::fill_rect(shot, 20, 60, 88, 60, 30);
            text.inner += " tell us what you think survey";
        }
        if (plan.archetype == Archetype::probabilistic_noise && !blocked.target && run == 0) {
            // A probabilistic request: shows up on some visits only.
            t.requests.push_back(detail::request(
                "rp1", page_url,
                "https://survey-widget.example/poll/embed/ask.min.js?sid=" +
                    hex_token(job_seed + "|sid", 12),
                70, "application/javascript", "function ask(){}", 1100));
        }
    }

    if (plan.archetype == Archetype::benign_asset) {
        std::string util_url = "https://" + page +
                               "/static/js/modules/metrics/util/prefetch/helper/v1/0/0/widgets.min.js";
        if (!blocked_matches(util_url)) {
            t.requests.push_back(detail::request("ru1", page_url, util_url, 50,
                                                 "application/javascript",
                                                 "function prefetch(){links.warm()}", 800));
            t.graph["ru1"] = GraphMetrics{0, 1, 1, 0};
        }
    }

    if (plan.archetype == Archetype::functional_script) {
        std::string gal_url = "https://" + third + "/cdn/ui/components/gallery/loader/v5/4/2/gallery.min.js";
        std::string cfg_url = "https://" + third + "/cdn/ui/components/gallery/config/v5/data.json";
        bool gone = blocked_matches(gal_url);
        if (!gone) {
            t.requests.push_back(detail::request(
                "rg1", page_url, gal_url, 50, "application/javascript",
                "var tpl=eval(load('tpl'));function slides(){return eval(tpl)(cfg)}", 22000));
            t.graph["rg1"] = GraphMetrics{0, 3, 2, 1};
            t.requests.push_back(detail::request("rg2", gal_url, cfg_url, 60, "application/json",
                                                 "{\"slides\":8}", 1200));

            DomElement gallery = detail::element("section", 0, 460, 1280, 600, {"gallery"});
            DomElement cap1 = detail::element("span", 20, 480, 300, 24, {"caption"},
                                              {{"text", "sunset over the bay"}});
            DomElement cap2 = detail::element("span", 20, 520, 300, 24, {"caption"},
                                              {{"text", "city lights at night"}});
            DomElement prev = detail::element("button", 20, 1000, 80, 40, {"gallery-prev"});
            DomElement next = detail::element("button", 120, 1000, 80, 40, {"gallery-next"});
            for (const DomElement& e : {gallery, cap1, cap2, prev, next}) t.dom.push_back(e);
            t.listeners.push_back(detail::listener("click", prev, "function(){gallery.prev()}"));
            t.listeners.push_back(detail::listener("click", next, "function(){gallery.next()}"));
            t.appearance.css_classes.insert(t.appearance.css_classes.end(),
                                            {"gallery", "caption", "caption", "gallery-prev", "gallery-next"});
            t.appearance.tag_sequence.insert(t.appearance.tag_sequence.end(),
                                             {"section", "span", "span", "button", "button"});
            detail::fill_rect(shot, 0, 120, 128, 60, 60);
            text.inner += " photo gallery of the day sunset city lights";
            text.main += " photo gallery";
        } else {
            t.console.push_back({"error", 950, "page", "TypeError: gallery is undefined"});
            t.meta.load_time_ms += 1500;
        }
    }

    if (plan.archetype == Archetype::exception_breakage) {
        std::string rec_url = "https://" + third + "/" + plan.rec_path;
        bool gone = blocked_matches(rec_url);
        if (!gone) {
            t.requests.push_back(detail::request(
                "rr1", page_url, rec_url, 50, "application/javascript",
                "function recs(){grid.fill(eval(model))}", 9000));
            t.graph["rr1"] = GraphMetrics{1, 3, 2, 1};

            DomElement recs = detail::element("section", 0, 1100, 1280, 400, {"recommendations"});
            DomElement item1 = detail::element("span", 20, 1120, 280, 24, {"rec-item"},
                                               {{"text", "customers also bought"}});
            DomElement item2 = detail::element("span", 20, 1160, 280, 24, {"rec-item"},
                                               {{"text", "matching accessories"}});
            for (const DomElement& e : {recs, item1, item2}) t.dom.push_back(e);
            if (!plan.content_style_breakage) {
                DomElement more = detail::element("button", 20, 1400, 120, 40, {"rec-more"});
                t.dom.push_back(more);
                t.listeners.push_back(detail::listener("click", more, "function(){recs.page()}"));
                t.appearance.css_classes.push_back("rec-more");
                t.appearance.tag_sequence.push_back("button");
            }
            t.appearance.css_classes.insert(t.appearance.css_classes.end(),
                                            {"recommendations", "rec-item", "rec-item"});
            t.appearance.tag_sequence.insert(t.appearance.tag_sequence.end(),
                                             {"section", "span", "span"});
            detail::fill_rect(shot, 0, 180, 128, 50, 50);
            text.inner += " customers also bought matching accessories recommended picks";
            text.main += " recommended picks";
        } else {
            if (!plan.content_style_breakage)
                t.console.push_back({"error", 950, "page", "recs failed to load"});
            t.meta.load_time_ms += 800;
        }
    }

    if (plan.archetype == Archetype::mixed_request) {
        std::string goods = digit_token(job_seed + "|goods", 15);
        std::string sku = digit_token(job_seed + "|sku", 14);
        std::string click = hex_token(job_seed + "|click", 32);
        if (page == "www.temu.com") {  // the canonical fixture keeps familiar values
            goods = "601099526089385";
            sku = "17592258865022";
        }
        std::string base = "https://" + page + "/subject/n9/landing/product/view/redirect/page.html";
        std::string param_name = plan.with_cookie_fields ? "click_id" : "_x_ns_msclkid";
        std::vector<std::pair<std::string, std::string>> params = {
            {"goods_id", goods}, {"sku_id", sku}, {param_name, click}};
        if (plan.with_cookie_fields) params.erase(params.begin() + 1);  // goods_id, click_id only

        // The blocked run strips exactly one field.
        std::optional<RequestField> stripped;
        if (blocked.target && blocked.target->kind == TargetKind::field)
            stripped = blocked.target->field;

        std::string url = base;
        char sep = '?';
        for (const auto& [name, value] : params) {
            if (stripped && stripped->kind == FieldKind::query_param && stripped->name == name)
                continue;
            url += sep + name + "=" + value;
            sep = '&';
        }

        bool functional_field_gone =
            stripped && (stripped->name == "goods_id" || stripped->name == "sku_id" ||
                         stripped->name == "item" || stripped->name == "cart_token");

        std::string product_words = "fender stratocaster sunburst " + goods;
        std::string response = functional_field_gone
                                   ? "<html><body>generic landing page</body></html>"
                                   : "<html><body>product " + product_words + "</body></html>";
        std::int64_t size = functional_field_gone ? 1800 : 5200;

        RequestRecord mix = detail::request("rm1", page_url, url, 50, "text/html", response, size);
        if (plan.with_cookie_fields) {
            std::string cart = hex_token(job_seed + "|cart", 24);
            std::string uid = hex_token(job_seed + "|uidc", 32);
            std::string cookie_header;
            auto append_cookie = [&](const std::string& name, const std::string& value) {
                if (stripped && stripped->kind == FieldKind::cookie && stripped->name == name) return;
                if (!cookie_header.empty()) cookie_header += "; ";
                cookie_header += name + "=" + value;
            };
            append_cookie("cart_token", cart);
            append_cookie("uid", uid);
            if (!cookie_header.empty()) mix.headers.emplace_back("Cookie", cookie_header);
        }
        t.requests.push_back(mix);
        t.graph["rm1"] = GraphMetrics{0, 1, 1, 0};

        if (!functional_field_gone) {
            DomElement product = detail::element("span", 40, 520, 500, 30, {"product-name"},
                                                 {{"text", product_words}});
            t.dom.push_back(product);
            t.appearance.css_classes.push_back("product-name");
            t.appearance.tag_sequence.push_back("span");
            detail::fill_rect(shot, 10, 60, 108, 40, 70);
            text.inner += " product " + product_words;
            text.main += " " + product_words;
        }
    }

    // --- appearance files -----------------------------------------------------
    t.appearance.inner_text = text.inner;
    t.appearance.main_text = text.main;
    if (plan.archetype == Archetype::empty_page) {
        t.appearance.inner_text.clear();
        t.appearance.main_text.clear();
        t.appearance.fonts.clear();
        t.appearance.colors.clear();
        t.appearance.css_classes.clear();
        t.appearance.tag_sequence.clear();
    }

    fs::create_directories(out_dir);
    write_png_gray(shot, out_dir / "shot.png");
    write_png_gray(shot, out_dir / "shot2.png");  // steady page: no dynamism
    t.appearance.screenshot_path = "shot.png";
    t.appearance.second_screenshot_path = "shot2.png";
    write_png_gray(detail::crop(shot, 0, 40), out_dir / "region-cormer.png");
    write_png_gray(detail::crop(shot, 40, 120), out_dir / "region-main.png");
    write_png_gray(detail::crop(shot, 120, 230), out_dir / "region-section.png");
    write_png_gray(detail::crop(shot, 40, 230), out_dir / "region-vips.png");
    t.appearance.regions = {{"cormer", "region-cormer.png"},
                            {"main", "region-main.png"},
                            {"section", "region-section.png"},
                            {"vips", "region-vips.png"}};

    recompute_partiness(t);
    return t;
}

}  // namespace detail

// The request or fields a job's analysis targets, in enumeration order.
inline JobArtifacts planned_targets(const JobPlan& plan) {
    JobArtifacts out;
    const std::string page_url = "https://" + plan.page_host + "/";
    const std::string job_seed = plan.seed + "|" + plan.page_host;
    switch (plan.archetype) {
        case Archetype::pure_tracker:
        case Archetype::probabilistic_noise:
            out.targets.push_back(
                {"t0001",
                 TargetRef{TargetKind::request,
                           "https://" + plan.third_host + "/lib/analytics/collect/pixel/tag/v3/2/1/tracker.min.js",
                           std::nullopt}});
            break;
        case Archetype::benign_asset:
            out.targets.push_back(
                {"t0001",
                 TargetRef{TargetKind::request,
                           "https://" + plan.page_host +
                               "/static/js/modules/metrics/util/prefetch/helper/v1/0/0/widgets.min.js",
                           std::nullopt}});
            break;
        case Archetype::functional_script:
            out.targets.push_back(
                {"t0001",
                 TargetRef{TargetKind::request,
                           "https://" + plan.third_host + "/cdn/ui/components/gallery/loader/v5/4/2/gallery.min.js",
                           std::nullopt}});
            break;
        case Archetype::exception_breakage: {
            std::string url = "https://" + plan.third_host + "/" + plan.rec_path;
            out.targets.push_back({"t0001", TargetRef{TargetKind::request, url, std::nullopt}});
            out.exception_rule = "@@||" + plan.third_host + "/" + plan.rec_path +
                                 "$domain=" + plan.page_host;
            break;
        }
        case Archetype::mixed_request: {
            out.targets_mode = "field";
            std::string goods = digit_token(job_seed + "|goods", 15);
            std::string sku = digit_token(job_seed + "|sku", 14);
            std::string click = hex_token(job_seed + "|click", 32);
            if (plan.page_host == "www.temu.com") {
                goods = "601099526089385";
                sku = "17592258865022";
            }
            std::string base = "https://" + plan.page_host +
                               "/subject/n9/landing/product/view/redirect/page.html";
            int counter = 0;
            auto add = [&](const std::string& url, FieldKind kind, const std::string& name,
                           const std::string& value) {
                char id[16];
                std::snprintf(id, sizeof(id), "f%04d", ++counter);
                out.targets.push_back(
                    {id, TargetRef{TargetKind::field, url, RequestField{kind, name, value}}});
            };
            if (plan.with_cookie_fields) {
                std::string url = base + "?goods_id=" + goods + "&click_id=" + click;
                add(url, FieldKind::query_param, "goods_id", goods);
                add(url, FieldKind::query_param, "click_id", click);
                add(url, FieldKind::cookie, "cart_token", hex_token(job_seed + "|cart", 24));
                add(url, FieldKind::cookie, "uid", hex_token(job_seed + "|uidc", 32));
            } else {
                std::string url = base + "?goods_id=" + goods + "&sku_id=" + sku +
                                  "&_x_ns_msclkid=" + click;
                add(url, FieldKind::query_param, "goods_id", goods);
                add(url, FieldKind::query_param, "sku_id", sku);
                add(url, FieldKind::query_param, "_x_ns_msclkid", click);
            }
            break;
        }
        case Archetype::empty_page:
            break;
    }
    return out;
}

// Writes one complete job directory; returns its targets and, for
// exception jobs, the rule to add to the fixture filter list.
inline JobArtifacts write_job(const fs::path& root, const JobPlan& plan) {
    JobArtifacts artifacts = planned_targets(plan);
    fs::path job_dir = root / plan.page_host;

    for (int run = 0; run < plan.k; ++run)
        save_trace(detail::build_trace(plan, run, BlockAction{}, vanilla_run_dir(job_dir, run)),
                   vanilla_run_dir(job_dir, run) / "trace.json");

    if (plan.write_target_runs) {
        for (const PlannedTarget& target : artifacts.targets) {
            for (int run = 0; run < plan.k; ++run) {
                fs::path dir = blocked_run_dir(job_dir, target.id, run);
                save_trace(detail::build_trace(plan, run, BlockAction{target.ref}, dir),
                           dir / "trace.json");
            }
        }
    }

    // Exception jobs also carry blocked runs keyed by the flipped rule, the
    // layout breakage reconstruction reads.
    if (artifacts.exception_rule) {
        FilterRule flipped = flip_exception(parse_rule(*artifacts.exception_rule));
        std::string slug = rule_slug(flipped);
        const TargetRef& ref = artifacts.targets.front().ref;
        for (int run = 0; run < plan.k; ++run) {
            fs::path dir = blocked_run_dir(job_dir, slug, run);
            save_trace(detail::build_trace(plan, run, BlockAction{ref}, dir), dir / "trace.json");
        }
    }

    std::vector<JobTarget> job_targets;
    for (const PlannedTarget& t : artifacts.targets) job_targets.push_back({t.id, t.ref});
    std::ofstream out(job_dir / "targets.json");
    out << targets_to_json(job_targets, artifacts.targets_mode, plan.site_rank).dump(2) << '\n';
    return artifacts;
}

// ---------------------------------------------------------------------------
// Suites

struct TrainingSuite {
    fs::path jobs_root;
    fs::path list_file;
    fs::path functional_cookies_file;
};

// A training corpus: tracker pages (tracking positives, breakage
// negatives), benign pages (tracking negatives), exception-rule pages
// (breakage positives) and mixed pages (field rows).
inline TrainingSuite write_training_suite(const fs::path& root, int k = 3) {
    fs::create_directories(root);
    TrainingSuite suite;
    suite.jobs_root = root / "jobs";
    fs::create_directories(suite.jobs_root);

    std::vector<std::string> list_lines = {"! synthetic fixture list"};

    // Host names of assorted lengths keep accidental scalars (URL length
    // and the like) from separating the classes on their own.
    const std::vector<std::string> shop_hosts = {
        "shop-a.example",        "bargain-bin.example", "guitars.example",
        "mega-outlet-store.example", "tea.example",     "books-and-more.example",
        "vinyl-crate.example",   "corner-deli.example"};
    const std::vector<std::string> tracker_hosts = {
        "trk.example",           "metrics-hub.example", "pixelfarm.example",
        "audience-insight.example", "tag.example",      "clickstream-data.example",
        "adnet-relay.example",   "beacon-grid.example"};
    const std::vector<std::string> benign_hosts = {
        "news-site.example",     "blog.example",        "city-portal.example",
        "recipes-daily.example", "forum-board.example", "weather-now.example",
        "travelogue.example",    "gardening-tips-weekly.example"};

    for (int i = 0; i < 8; ++i) {
        JobPlan plan;
        plan.archetype = Archetype::pure_tracker;
        plan.page_host = shop_hosts[static_cast<std::size_t>(i)];
        plan.third_host = tracker_hosts[static_cast<std::size_t>(i)];
        plan.k = k;
        plan.seed = "train-tracker-" + std::to_string(i);
        write_job(suite.jobs_root, plan);
        list_lines.push_back("||" + plan.third_host + "^");
    }
    for (int i = 0; i < 8; ++i) {
        JobPlan plan;
        plan.archetype = Archetype::benign_asset;
        plan.page_host = benign_hosts[static_cast<std::size_t>(i)];
        plan.k = k;
        plan.seed = "train-benign-" + std::to_string(i);
        write_job(suite.jobs_root, plan);
    }
    for (int i = 0; i < 6; ++i) {
        JobPlan plan;
        plan.archetype = Archetype::exception_breakage;
        plan.page_host = "brk-" + std::to_string(i) + ".example";
        plan.third_host = "cdn-brk-" + std::to_string(i) + ".example";
        plan.content_style_breakage = i % 2 == 1;
        plan.write_target_runs = false;  // only the flipped-rule captures
        plan.k = k;
        plan.seed = "train-brk-" + std::to_string(i);
        JobArtifacts artifacts = write_job(suite.jobs_root, plan);
        list_lines.push_back(*artifacts.exception_rule);
    }
    for (int i = 0; i < 6; ++i) {
        JobPlan plan;
        plan.archetype = Archetype::mixed_request;
        plan.page_host = "www.mixed-" + std::to_string(i) + ".example";
        plan.with_cookie_fields = true;
        plan.k = k;
        plan.seed = "train-mixed-" + std::to_string(i);
        write_job(suite.jobs_root, plan);
        list_lines.push_back("||mixed-" + std::to_string(i) + ".example^$removeparam=click_id");
        list_lines.push_back("||mixed-" + std::to_string(i) + ".example^$cookie=uid");
    }

    suite.list_file = root / "fixture_rules.txt";
    std::ofstream list_out(suite.list_file);
    for (const std::string& line : list_lines) list_out << line << '\n';

    suite.functional_cookies_file = root / "functional_cookies.txt";
    std::ofstream cookies_out(suite.functional_cookies_file);
    cookies_out << "cart_token\n";
    return suite;
}

struct EvalExpectation {
    std::string job;
    std::string mode;  // "request" or "field"
    std::string target_id;
    std::string decision;
    std::string rule;  // "-" when none expected
};

struct EvalSuite {
    fs::path jobs_root;
    std::vector<EvalExpectation> manifest;
};

// The end-to-end evaluation suite; expectations are fixed by construction.
inline EvalSuite write_eval_suite(const fs::path& root, int k = 3) {
    EvalSuite suite;
    suite.jobs_root = root / "jobs";
    fs::create_directories(suite.jobs_root);

    {
        JobPlan plan;
        plan.archetype = Archetype::pure_tracker;
        plan.page_host = "guitar-store.example";
        plan.third_host = "pixel-counter.example";
        plan.k = k;
        plan.seed = "eval-tracker";
        write_job(suite.jobs_root, plan);
        suite.manifest.push_back(
            {plan.page_host, "request", "t0001", "tracker",
             "||pixel-counter.example/lib/analytics/collect/pixel/tag/v3/2/1/tracker.min.js"});
    }
    {
        JobPlan plan;
        plan.archetype = Archetype::functional_script;
        plan.page_host = "news-portal.example";
        plan.third_host = "media-cdn.example";
        plan.k = k;
        plan.seed = "eval-functional";
        write_job(suite.jobs_root, plan);
        suite.manifest.push_back({plan.page_host, "request", "t0001", "mixed_candidate", "-"});
    }
    {
        JobPlan plan;
        plan.archetype = Archetype::exception_breakage;
        plan.page_host = "fender.com";
        plan.third_host = "cdn.cquotient.com";
        plan.rec_path = "gretel.min.js";
        plan.k = k;
        plan.seed = "eval-exception";
        write_job(suite.jobs_root, plan);
        suite.manifest.push_back({plan.page_host, "request", "t0001", "mixed_candidate", "-"});
    }
    {
        JobPlan plan;
        plan.archetype = Archetype::mixed_request;
        plan.page_host = "www.temu.com";
        plan.k = k;
        plan.seed = "eval-mixed";
        write_job(suite.jobs_root, plan);
        suite.manifest.push_back({plan.page_host, "field", "f0001", "non_tracker", "-"});
        suite.manifest.push_back({plan.page_host, "field", "f0002", "non_tracker", "-"});
        suite.manifest.push_back(
            {plan.page_host, "field", "f0003", "tracking_field", "||temu.com^$removeparam=_x_ns_msclkid"});
    }
    {
        JobPlan plan;
        plan.archetype = Archetype::probabilistic_noise;
        plan.page_host = "noisy-shop.example";
        plan.third_host = "tag-sprinkler.example";
        plan.k = k;
        plan.seed = "eval-noise";
        write_job(suite.jobs_root, plan);
        suite.manifest.push_back(
            {plan.page_host, "request", "t0001", "tracker",
             "||tag-sprinkler.example/lib/analytics/collect/pixel/tag/v3/2/1/tracker.min.js"});
    }
    {
        JobPlan plan;
        plan.archetype = Archetype::empty_page;
        plan.page_host = "blank.example";
        plan.k = k;
        plan.seed = "eval-empty";
        write_job(suite.jobs_root, plan);
    }
    return suite;
}

inline void write_manifest(const EvalSuite& suite, const fs::path& path) {
    json out;
    out["jobs"] = json::array();
    std::map<std::string, json> by_job;
    for (const EvalExpectation& e : suite.manifest) {
        if (!by_job.contains(e.job))
            by_job[e.job] = json{{"name", e.job}, {"mode", e.mode}, {"expected", json::array()}};
        by_job[e.job]["expected"].push_back(json{
            {"target", e.target_id}, {"decision", e.decision}, {"rule", e.rule}});
    }
    // Jobs with no expectations still belong in the manifest.
    for (const fs::directory_entry& entry : fs::directory_iterator(suite.jobs_root))
        if (entry.is_directory() && !by_job.contains(entry.path().filename().string()))
            by_job[entry.path().filename().string()] =
                json{{"name", entry.path().filename().string()},
                     {"mode", "request"},
                     {"expected", json::array()}};
    for (const auto& [name, job] : by_job) out["jobs"].push_back(job);
    std::ofstream file(path);
    file << out.dump(2) << '\n';
}

}  // namespace trackdiff::synth

#endif  // TRACKDIFF_TRACE_SYNTH_HPP_
