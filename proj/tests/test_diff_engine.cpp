#include "trackdiff/diff.hpp"

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support/test_util.hpp"

using namespace trackdiff;
using trackdiff::testsupport::ScratchDir;

namespace {

// Independent cosine oracle: different tokenizer plumbing and accumulation
// order from the library implementation.
double brute_force_text_cosine(const std::string& a, const std::string& b) {
    auto tokens_of = [](const std::string& s) {
        std::string cleaned;
        for (char c : s)
            cleaned.push_back(std::isalnum(static_cast<unsigned char>(c))
                                  ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
                                  : ' ');
        std::istringstream in(cleaned);
        std::vector<std::string> tokens;
        std::string tok;
        while (in >> tok) tokens.push_back(tok);
        std::sort(tokens.begin(), tokens.end());
        std::vector<std::pair<std::string, long>> counts;
        for (const std::string& t : tokens) {
            if (!counts.empty() && counts.back().first == t)
                ++counts.back().second;
            else
                counts.emplace_back(t, 1);
        }
        return counts;
    };
    auto va = tokens_of(a), vb = tokens_of(b);
    if (va.empty() && vb.empty()) return 1.0;
    if (va.empty() || vb.empty()) return 0.0;
    long double dot = 0, na = 0, nb = 0;
    for (const auto& [t, c] : va) {
        na += static_cast<long double>(c) * c;
        for (const auto& [u, d] : vb)
            if (t == u) dot += static_cast<long double>(c) * d;
    }
    for (const auto& [t, c] : vb) nb += static_cast<long double>(c) * c;
    return static_cast<double>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

GrayImage solid_image(int w, int h, std::uint8_t value) {
    GrayImage img;
    img.width = w;
    img.height = h;
    img.pixels.assign(static_cast<std::size_t>(w) * h, value);
    return img;
}

RequestRecord simple_request(const std::string& id, const std::string& url, double ts,
                             const std::string& method = "GET") {
    RequestRecord r;
    r.id = id;
    r.method = method;
    r.initiator = "document";
    r.url = url;
    r.timestamp = ts;
    return r;
}

DomElement element(const std::string& tag, double x, double y, double w, double h,
                   std::vector<std::string> classes = {}) {
    DomElement e;
    e.tag = tag;
    e.x = x;
    e.y = y;
    e.width = w;
    e.height = h;
    e.css_classes = std::move(classes);
    return e;
}

// A minimal but complete trace for diff tests; screenshots are written
// into `dir`.
Trace make_trace(const ScratchDir& dir, const std::string& stem, std::uint8_t shade) {
    Trace t;
    t.meta.page_url = "https://shop.example/";
    t.meta.user_agent = "UA";
    t.meta.viewport_width = 1280;
    t.meta.viewport_height = 800;
    t.meta.load_time_ms = 1000;
    t.dir = dir.path();

    write_png_gray(solid_image(64, 64, shade), dir / (stem + "-shot.png"));
    write_png_gray(solid_image(64, 64, shade), dir / (stem + "-shot2.png"));
    t.appearance.screenshot_path = stem + "-shot.png";
    t.appearance.second_screenshot_path = stem + "-shot2.png";
    t.appearance.inner_text = "welcome to the shop";
    t.appearance.main_text = "welcome";
    t.appearance.css_classes = {"nav", "hero"};
    t.appearance.tag_sequence = {"main", "section", "button"};

    t.requests = {simple_request("r1", "https://shop.example/app.js", 1),
                  simple_request("r2", "https://tracker.example/pixel.gif?uid=42", 2)};
    t.dom = {element("button", 10, 10, 100, 30, {"buy"})};
    EventListenerRecord listener;
    listener.event_type = "click";
    listener.target = t.dom[0];
    listener.handler_text = "function(){buy()}";
    t.listeners = {listener};
    recompute_partiness(t);
    return t;
}

}  // namespace

TEST(TextSimilarity, IdentityAndOrthogonal) {
    EXPECT_DOUBLE_EQ(text_similarity("a b c", "a b c"), 1.0);
    EXPECT_DOUBLE_EQ(text_similarity("a", "b"), 0.0);
    EXPECT_DOUBLE_EQ(text_similarity("", ""), 1.0);
}

TEST(TextSimilarity, HandComputedOneOverSqrtTwo) {
    // Token count vectors (1,1,0) vs (1,0,0): dot 1, norms sqrt(2) and 1.
    double sim = text_similarity("alpha beta", "alpha");
    EXPECT_NEAR(sim, 1.0 / std::sqrt(2.0), 1e-4);
}

TEST(TextSimilarity, SymmetricAndBounded) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        std::string a, b;
        for (std::uint64_t n = rng() % 12; n > 0; --n) a += "tok" + std::to_string(rng() % 8) + " ";
        for (std::uint64_t n = rng() % 12; n > 0; --n) b += "tok" + std::to_string(rng() % 8) + " ";
        double ab = text_similarity(a, b);
        double ba = text_similarity(b, a);
        EXPECT_DOUBLE_EQ(ab, ba);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0);
    }
}

TEST(RequestsMatch, IdenticalRequests) {
    RequestRecord r = simple_request("a", "https://x.example/app.js?v=1", 5);
    EXPECT_TRUE(requests_match(r, r));
}

TEST(RequestsMatch, CacheBusterAmongFortyTokens) {
    // 40 shared URL tokens, one extra cache-busting token on one side:
    // cosine = 40/sqrt(40*41), comfortably above 0.95.
    std::string base = "https://cdn.example/";
    for (int i = 0; i < 36; ++i) base += "seg" + std::to_string(i) + "/";
    RequestRecord a = simple_request("a", base + "app.js", 1);
    RequestRecord b = simple_request("b", base + "app.js?cachebust999", 1);

    double expected = brute_force_text_cosine(a.url, b.url);
    EXPECT_NEAR(text_similarity(a.url, b.url), expected, 1e-9);
    EXPECT_GT(expected, 0.95);
    EXPECT_TRUE(requests_match(a, b));
}

TEST(RequestsMatch, MethodMismatch) {
    RequestRecord a = simple_request("a", "https://x.example/api", 1, "GET");
    RequestRecord b = simple_request("b", "https://x.example/api", 1, "POST");
    EXPECT_FALSE(requests_match(a, b));
}

TEST(AlignRequests, IdenticalLists) {
    std::vector<RequestRecord> reqs = {simple_request("a", "https://x.example/1.js", 1),
                                       simple_request("b", "https://x.example/2.js", 2)};
    RequestAlignment alignment = align_requests(reqs, reqs);
    EXPECT_EQ(alignment.matched.size(), 2u);
    EXPECT_TRUE(alignment.a_only.empty());
    EXPECT_TRUE(alignment.b_only.empty());
}

TEST(AlignRequests, MissingTrackerShowsInAOnly) {
    std::vector<RequestRecord> a = {simple_request("a1", "https://x.example/app.js", 1),
                                    simple_request("a2", "https://tracker.example/t.js", 2)};
    std::vector<RequestRecord> b = {simple_request("b1", "https://x.example/app.js", 1)};
    RequestAlignment alignment = align_requests(a, b);
    ASSERT_EQ(alignment.a_only.size(), 1u);
    EXPECT_EQ(a[alignment.a_only[0]].url, "https://tracker.example/t.js");
    EXPECT_TRUE(alignment.b_only.empty());
}

TEST(AlignRequests, EarlierTimestampWinsContention) {
    // Both A requests fuzz-match the single B request; the earlier one
    // takes it, the later lands in a_only.
    RequestRecord early = simple_request("early", "https://x.example/app.js", 1);
    RequestRecord late = simple_request("late", "https://x.example/app.js", 9);
    RequestRecord target = simple_request("b", "https://x.example/app.js", 5);
    RequestAlignment alignment = align_requests({late, early}, {target});
    ASSERT_EQ(alignment.matched.size(), 1u);
    EXPECT_EQ(alignment.matched[0].first, 1u);  // index of `early` in input order
    ASSERT_EQ(alignment.a_only.size(), 1u);
    EXPECT_EQ(alignment.a_only[0], 0u);
}

TEST(ElementsMatch, IdenticalAndShifted) {
    DomElement a = element("button", 10, 10, 100, 30, {"buy", "cta"});
    EXPECT_TRUE(elements_match(a, a));

    DomElement shifted = a;
    shifted.x = 12;  // IoU = 2940/3060 ~ 0.96
    EXPECT_TRUE(elements_match(a, shifted));
}

TEST(ElementsMatch, TagMismatch) {
    DomElement a = element("span", 0, 0, 50, 20);
    DomElement b = element("button", 0, 0, 50, 20);
    EXPECT_FALSE(elements_match(a, b));
}

TEST(ElementsMatch, ContentHashIgnored) {
    DomElement a = element("span", 0, 0, 50, 20, {"x"});
    DomElement b = a;
    b.content_hash = "different";
    EXPECT_TRUE(elements_match(a, b));
}

TEST(ListenersEqual, HandlerByteEquality) {
    EventListenerRecord a;
    a.event_type = "click";
    a.target = element("button", 0, 0, 10, 10);
    a.handler_text = "function(){x()}";

    EventListenerRecord same = a;
    EXPECT_TRUE(listeners_equal(a, same));

    EventListenerRecord other_tag = a;
    other_tag.target = element("a", 0, 0, 10, 10);
    EXPECT_FALSE(listeners_equal(a, other_tag));

    // Reformatted handler text is a different listener by contract.
    EventListenerRecord reformatted = a;
    reformatted.handler_text = "function() { x() }";
    EXPECT_FALSE(listeners_equal(a, reformatted));
}

TEST(ScriptSimilarity, TokenCountCosine) {
    ScriptRecord a{"var x = 1; fire(x);", 0, 0, std::nullopt};
    EXPECT_DOUBLE_EQ(script_similarity(a, a), 1.0);

    ScriptRecord empty{"", 0, 0, std::nullopt};
    EXPECT_DOUBLE_EQ(script_similarity(a, empty), 0.0);

    // Minified variant: identifiers survive, whitespace does not.
    ScriptRecord minified{"var x=1;fire(x);", 0, 0, std::nullopt};
    double sim = script_similarity(a, minified);
    EXPECT_DOUBLE_EQ(sim, 1.0);  // same code tokens, counts included

    // Renamed identifier lowers similarity but keeps structure overlap.
    ScriptRecord renamed{"var y = 1; fire(y);", 0, 0, std::nullopt};
    double expected_shared = script_similarity(a, renamed);
    EXPECT_GT(expected_shared, 0.4);
    EXPECT_LT(expected_shared, 1.0);
}

TEST(EmbedScreenshot, DeterministicAndClosedForm) {
    ScratchDir dir("embed");
    write_png_gray(solid_image(64, 64, 0), dir / "black.png");
    write_png_gray(solid_image(64, 64, 255), dir / "white.png");

    std::vector<float> white1 = embed_screenshot(dir / "white.png");
    std::vector<float> white2 = embed_screenshot(dir / "white.png");
    EXPECT_EQ(white1, white2);
    EXPECT_DOUBLE_EQ(embedding_cosine(white1, white2), 1.0);

    // Closed form: all-white pools to 255 in every cell, normalizing to
    // 1/16 per cell; all-black pools to the zero vector.
    for (float v : white1) EXPECT_NEAR(v, 1.0 / 16.0, 1e-6);
    std::vector<float> black = embed_screenshot(dir / "black.png");
    for (float v : black) EXPECT_EQ(v, 0.0f);
    EXPECT_DOUBLE_EQ(embedding_cosine(black, white1), 0.0);  // zero-vector convention
    EXPECT_DOUBLE_EQ(embedding_cosine(black, black), 0.0);
}

TEST(EmbedScreenshot, FullyMaskedImageIsZeroVector) {
    ScratchDir dir("embed");
    write_png_gray(solid_image(32, 32, 200), dir / "img.png");
    DynamismMask mask;
    mask.rects.push_back({0, 0, 32, 32});
    std::vector<float> v = embed_screenshot(dir / "img.png", mask);
    for (float x : v) EXPECT_EQ(x, 0.0f);
}

TEST(EmbedScreenshot, UnreadableImageThrows) {
    ScratchDir dir("embed");
    testsupport::write_file(dir / "not_a_png.png", "plainly not a png");
    EXPECT_THROW(embed_screenshot(dir / "not_a_png.png"), UnreadableImage);
    EXPECT_THROW(embed_screenshot(dir / "missing.png"), UnreadableImage);
}

TEST(DynamismMask, IdenticalShotsEmptyMask) {
    ScratchDir dir("mask");
    write_png_gray(solid_image(48, 48, 80), dir / "a.png");
    write_png_gray(solid_image(48, 48, 80), dir / "b.png");
    EXPECT_TRUE(dynamism_mask(dir / "a.png", dir / "b.png").empty());
}

TEST(DynamismMask, SingleBlockGetsOneCoveringRect) {
    ScratchDir dir("mask");
    GrayImage a = solid_image(48, 48, 80);
    GrayImage b = a;
    for (int y = 20; y < 30; ++y)
        for (int x = 5; x < 15; ++x) b.at(x, y) = 200;
    write_png_gray(a, dir / "a.png");
    write_png_gray(b, dir / "b.png");

    DynamismMask mask = dynamism_mask(dir / "a.png", dir / "b.png");
    ASSERT_EQ(mask.rects.size(), 1u);
    // Oracle: direct pixel scan; every differing pixel must be covered.
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            if (a.at(x, y) != b.at(x, y)) EXPECT_TRUE(mask.covers(x, y));
    EXPECT_EQ(mask.rects[0].width, 10);
    EXPECT_EQ(mask.rects[0].height, 10);
}

TEST(DynamismMask, FullyDifferentShotsMaskFullFrame) {
    ScratchDir dir("mask");
    write_png_gray(solid_image(32, 32, 0), dir / "a.png");
    write_png_gray(solid_image(32, 32, 255), dir / "b.png");
    DynamismMask mask = dynamism_mask(dir / "a.png", dir / "b.png");
    ASSERT_EQ(mask.rects.size(), 1u);
    EXPECT_EQ(mask.rects[0], (MaskRect{0, 0, 32, 32}));
}

TEST(DiffPair, SelfDiffIsNeutral) {
    ScratchDir dir("diff");
    Trace t = make_trace(dir, "v", 128);
    RawDiff d = diff_pair(t, t);

    EXPECT_TRUE(d.items.empty());
    EXPECT_DOUBLE_EQ(d.scalars.at("sim.embedding"), 1.0);
    EXPECT_DOUBLE_EQ(d.scalars.at("sim.text"), 1.0);
    EXPECT_DOUBLE_EQ(d.scalars.at("ms.load_time_delta"), 0.0);
    EXPECT_DOUBLE_EQ(d.scalars.at("n.font_delta"), 0.0);
    EXPECT_EQ(d.components, all_components());
}

TEST(DiffPair, ReportsExactlyTheRemovedRequestAndListener) {
    ScratchDir dir("diff");
    Trace vanilla = make_trace(dir, "v", 128);
    Trace blocked = make_trace(dir, "b", 128);
    blocked.meta.run_index = 1;
    blocked.meta.blocked_target =
        TargetRef{TargetKind::request, "https://tracker.example/pixel.gif?uid=42", std::nullopt};
    blocked.requests.pop_back();   // tracker request gone
    blocked.listeners.clear();     // its listener gone

    RawDiff d = diff_pair(vanilla, blocked);
    int removed_requests = 0, removed_listeners = 0;
    for (const auto& [key, item] : d.items) {
        if (item.kind == "req_removed") {
            ++removed_requests;
            EXPECT_EQ(item.payload.at("url"), "https://tracker.example/pixel.gif?uid=42");
            EXPECT_EQ(item.payload.at("partiness"), "third");
        }
        if (item.kind == "listener_removed") ++removed_listeners;
        EXPECT_NE(item.kind, "req_added");
        EXPECT_NE(item.kind, "elem_removed");
    }
    EXPECT_EQ(removed_requests, 1);
    EXPECT_EQ(removed_listeners, 1);
    EXPECT_DOUBLE_EQ(d.scalars.at("n.target_in_vanilla"), 1.0);
    EXPECT_DOUBLE_EQ(d.scalars.at("n.blocked_by_target"), 1.0);
}

TEST(DiffPair, MismatchedViewportThrows) {
    ScratchDir dir("diff");
    Trace vanilla = make_trace(dir, "v", 128);
    Trace blocked = make_trace(dir, "b", 128);
    blocked.meta.viewport_width = 780;
    blocked.meta.viewport_height = 476;
    EXPECT_THROW(diff_pair(vanilla, blocked), PairingMismatch);
}

TEST(Consensus, SingleDiffIsIdentity) {
    RawDiff d;
    d.scalars["n.x"] = 3;
    d.items["req_removed:GET|https://t.example/a"] = {"req_removed", json{{"url", "https://t.example/a"}}};
    d.components = all_components();

    ConsensusDiff c = consensus({d}, 1);
    EXPECT_EQ(c.scalars.at("n.x"), 3);
    EXPECT_EQ(c.items.size(), 1u);
    EXPECT_EQ(c.items.begin()->second.count, 1);
}

TEST(Consensus, MinoritySpuriousItemExcludedMajorityKept) {
    // k = 3: a spurious UI delta in 2 of 9 pairs disappears; the true
    // request-removal delta in 9 of 9 stays.
    std::vector<RawDiff> diffs(9);
    for (std::size_t i = 0; i < 9; ++i) {
        diffs[i].items["req_removed:GET|https://t.example/t.js"] = {"req_removed", json{{"u", 1}}};
        if (i < 2)
            diffs[i].items["elem_removed:section|0,0,300,200|dialog,"] = {"elem_removed", json{{"d", 1}}};
    }
    ConsensusDiff c = consensus(diffs, 3);
    EXPECT_TRUE(c.items.contains("req_removed:GET|https://t.example/t.js"));
    EXPECT_EQ(c.items.at("req_removed:GET|https://t.example/t.js").count, 9);
    EXPECT_FALSE(c.items.contains("elem_removed:section|0,0,300,200|dialog,"));
}

TEST(Consensus, ScalarModeWithTieTowardZero) {
    std::vector<RawDiff> diffs(4);
    diffs[0].scalars["n.d"] = 5;
    diffs[1].scalars["n.d"] = 5;
    diffs[2].scalars["n.d"] = 0;
    diffs[3].scalars["n.d"] = 0;
    ConsensusDiff c = consensus(diffs, 2);
    EXPECT_DOUBLE_EQ(c.scalars.at("n.d"), 0.0);  // tie, nearest zero wins

    diffs[2].scalars["n.d"] = 5;
    c = consensus(diffs, 2);
    EXPECT_DOUBLE_EQ(c.scalars.at("n.d"), 5.0);
}

TEST(Consensus, PermutationInvariant) {
    std::mt19937_64 rng(11);
    std::vector<RawDiff> diffs(9);
    for (std::size_t i = 0; i < 9; ++i) {
        diffs[i].scalars["ms.load_time_delta"] = static_cast<double>(100 * (i % 3));
        if (i % 2 == 0)
            diffs[i].items["log:error|boom"] = {"console_removed", json{{"t", i}}};
    }
    ConsensusDiff base = consensus(diffs, 3);
    for (int round = 0; round < 10; ++round) {
        std::shuffle(diffs.begin(), diffs.end(), rng);
        ConsensusDiff again = consensus(diffs, 3);
        EXPECT_EQ(again.scalars, base.scalars);
        ASSERT_EQ(again.items.size(), base.items.size());
        for (const auto& [key, voted] : base.items) {
            ASSERT_TRUE(again.items.contains(key));
            EXPECT_EQ(again.items.at(key).count, voted.count);
            EXPECT_EQ(again.items.at(key).item.payload, voted.item.payload);
        }
    }
}

TEST(Consensus, WrongPairCountThrows) {
    std::vector<RawDiff> two(2);
    EXPECT_THROW(consensus(two, 2), WrongPairCount);
    EXPECT_THROW(consensus({}, 1), WrongPairCount);
}

TEST(Consensus, MajorityBoundaryProperty) {
    // Adding a spurious item to floor(k^2/2) pairs never includes it;
    // floor(k^2/2)+1 always does.
    std::mt19937_64 rng(23);
    for (int k : {1, 2, 3}) {
        int n = k * k;
        for (int round = 0; round < 50; ++round) {
            std::vector<RawDiff> diffs(static_cast<std::size_t>(n));
            int below = n / 2;
            int above = n / 2 + 1;
            std::vector<std::size_t> order(static_cast<std::size_t>(n));
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::shuffle(order.begin(), order.end(), rng);
            for (int i = 0; i < below; ++i)
                diffs[order[static_cast<std::size_t>(i)]].items["x:minority"] = {"elem_removed", json{}};
            std::shuffle(order.begin(), order.end(), rng);
            for (int i = 0; i < above && i < n; ++i)
                diffs[order[static_cast<std::size_t>(i)]].items["x:majority"] = {"elem_removed", json{}};

            ConsensusDiff c = consensus(diffs, k);
            EXPECT_FALSE(c.items.contains("x:minority")) << "k=" << k;
            EXPECT_TRUE(c.items.contains("x:majority")) << "k=" << k;
        }
    }
}
