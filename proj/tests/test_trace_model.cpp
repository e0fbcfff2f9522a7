#include "trackdiff/trace.hpp"

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "support/test_util.hpp"

using namespace trackdiff;
using trackdiff::testsupport::ScratchDir;

namespace {

json minimal_trace_json(const std::string& page_url = "https://example.com/") {
    json j;
    j["schema_version"] = 1;
    j["meta"] = {
        {"page_url", page_url},
        {"run_index", 0},
        {"blocked_target", nullptr},
        {"user_agent", "Mozilla/5.0 test"},
        {"viewport", {{"width", 1280}, {"height", 800}}},
        {"cache_mode", "record"},
        {"load_time_ms", 1200.0},
    };
    return j;
}

json request_json(const std::string& id, const std::string& url, double ts,
                  const std::string& method = "GET") {
    return json{{"id", id},
                {"direction", "outgoing"},
                {"initiator", "document"},
                {"method", method},
                {"url", url},
                {"headers", json::array()},
                {"body", ""},
                {"response_status", 200},
                {"response_body", "ok"},
                {"response_size", 2},
                {"timestamp", ts}};
}

}  // namespace

TEST(TraceModel, LoadsMinimalVanillaTrace) {
    ScratchDir dir("trace");
    json j = minimal_trace_json();
    testsupport::write_file(dir / "trace.json", j.dump(2));

    Trace t = load_trace(dir / "trace.json");
    EXPECT_EQ(t.requests.size(), 0u);
    EXPECT_EQ(t.dom.size(), 0u);
    EXPECT_FALSE(t.meta.blocked_target.has_value());
    EXPECT_EQ(t.meta.viewport_width, 1280);
}

TEST(TraceModel, GraphEntryRoundTripsThroughSaveLoad) {
    ScratchDir dir("trace");
    json j = minimal_trace_json();
    j["requests"] = json::array({request_json("r1", "https://example.com/app.js", 10.0)});
    j["graph"] = {{"r1",
                   {{"ancestor_eval_count", 2},
                    {"degree", 3},
                    {"ancestor_count", 4},
                    {"fingerprint_api_calls", 5}}}};
    testsupport::write_file(dir / "trace.json", j.dump(2));

    Trace t = load_trace(dir / "trace.json");
    ASSERT_TRUE(t.graph.contains("r1"));
    EXPECT_EQ(t.graph["r1"].degree, 3);
    EXPECT_EQ(t.graph["r1"].fingerprint_api_calls, 5);

    // Round trip: save, load, save again; the re-serialization is identical.
    save_trace(t, dir / "copy.json");
    Trace t2 = load_trace(dir / "copy.json");
    save_trace(t2, dir / "copy2.json");
    EXPECT_EQ(testsupport::read_file(dir / "copy.json"), testsupport::read_file(dir / "copy2.json"));
    EXPECT_EQ(t2.graph["r1"].ancestor_eval_count, 2);
}

TEST(TraceModel, DanglingGraphKeyIsRejected) {
    ScratchDir dir("trace");
    json j = minimal_trace_json();
    j["graph"] = {{"r9", {{"degree", 1}}}};
    testsupport::write_file(dir / "trace.json", j.dump(2));
    EXPECT_THROW(load_trace(dir / "trace.json"), DanglingReference);
}

TEST(TraceModel, SchemaViolationsNameTheFieldPath) {
    ScratchDir dir("trace");
    json j = minimal_trace_json();
    j["meta"]["viewport"]["width"] = -3;
    testsupport::write_file(dir / "trace.json", j.dump(2));
    try {
        load_trace(dir / "trace.json");
        FAIL() << "expected MalformedTrace";
    } catch (const MalformedTrace& e) {
        EXPECT_NE(std::string(e.what()).find("viewport"), std::string::npos);
    }
}

TEST(TraceModel, NonMonotoneTimestampsAreRejected) {
    ScratchDir dir("trace");
    json j = minimal_trace_json();
    j["requests"] = json::array({request_json("r1", "https://example.com/a.js", 20.0),
                                 request_json("r2", "https://example.com/b.js", 10.0)});
    testsupport::write_file(dir / "trace.json", j.dump(2));
    EXPECT_THROW(load_trace(dir / "trace.json"), MalformedTrace);
}

TEST(TraceModel, NegativeLoadTimeIsRejected) {
    ScratchDir dir("trace");
    json j = minimal_trace_json();
    j["meta"]["load_time_ms"] = -1.0;
    testsupport::write_file(dir / "trace.json", j.dump(2));
    EXPECT_THROW(load_trace(dir / "trace.json"), MalformedTrace);
}

TEST(TraceModel, PartinessFollowsRegistrableDomain) {
    ScratchDir dir("trace");
    json j = minimal_trace_json("https://www.fender.com/");
    j["requests"] = json::array({request_json("r1", "https://shop.fender.com/api?x=1", 1.0),
                                 request_json("r2", "https://cdn.cquotient.com/gretel.min.js", 2.0)});
    testsupport::write_file(dir / "trace.json", j.dump(2));
    Trace t = load_trace(dir / "trace.json");
    EXPECT_EQ(t.requests[0].partiness, Partiness::first);
    EXPECT_EQ(t.requests[1].partiness, Partiness::third);
}

TEST(TraceModel, PartinessAgreesWithPublicSuffixOracle) {
    // Fixture table of host -> registrable domain, derived from the
    // public-suffix algorithm by hand.
    std::ifstream oracle(std::string(TRACKDIFF_TEST_DATA_DIR) + "/psl_oracle.tsv");
    ASSERT_TRUE(oracle.is_open());
    std::string line;
    int checked = 0;
    while (std::getline(oracle, line)) {
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        ASSERT_NE(tab, std::string::npos) << line;
        std::string host = line.substr(0, tab);
        std::string expected = line.substr(tab + 1);
        EXPECT_EQ(registrable_domain(host), expected) << "host: " << host;
        ++checked;
    }
    EXPECT_GE(checked, 20);
}

TEST(TraceModel, ValidatePairingAcceptsMatchingRuns) {
    Trace vanilla, blocked;
    vanilla.meta.page_url = blocked.meta.page_url = "https://example.com/";
    vanilla.meta.user_agent = blocked.meta.user_agent = "UA";
    vanilla.meta.viewport_width = blocked.meta.viewport_width = 800;
    vanilla.meta.viewport_height = blocked.meta.viewport_height = 600;
    blocked.meta.blocked_target = TargetRef{TargetKind::request, "https://t.example/x.js", std::nullopt};
    EXPECT_TRUE(validate_pairing(vanilla, blocked).empty());
}

TEST(TraceModel, ValidatePairingReportsViewportAndTarget) {
    Trace vanilla, blocked;
    vanilla.meta.page_url = blocked.meta.page_url = "https://example.com/";
    vanilla.meta.user_agent = blocked.meta.user_agent = "UA";
    vanilla.meta.viewport_width = 800;
    vanilla.meta.viewport_height = 600;
    blocked.meta.viewport_width = 780;
    blocked.meta.viewport_height = 476;

    std::vector<std::string> mismatches = validate_pairing(vanilla, blocked);
    EXPECT_NE(std::find(mismatches.begin(), mismatches.end(), "viewport"), mismatches.end());
    EXPECT_NE(std::find(mismatches.begin(), mismatches.end(), "blocked_target"), mismatches.end());
}

TEST(TraceModel, EnumerateRequestsPicksScriptsAndParameterized) {
    Trace t;
    t.meta.page_url = "https://example.com/";
    RequestRecord image;
    image.id = "r1";
    image.method = "GET";
    image.url = "https://example.com/hero.png";
    image.timestamp = 1;
    RequestRecord script;
    script.id = "r2";
    script.method = "GET";
    script.url = "https://cdn.cquotient.com/gretel.min.js";
    script.timestamp = 2;
    RequestRecord with_params;
    with_params.id = "r3";
    with_params.method = "GET";
    with_params.url = "https://www.temu.com/landing.html?goods_id=601099526089385";
    with_params.timestamp = 3;
    t.requests = {image, script, with_params};

    std::vector<RequestRecord> picked = enumerate_requests(t);
    ASSERT_EQ(picked.size(), 2u);
    EXPECT_EQ(picked[0].id, "r2");
    EXPECT_EQ(picked[1].id, "r3");

    // Stable across repeated calls and a subset of the input.
    std::vector<RequestRecord> again = enumerate_requests(t);
    ASSERT_EQ(again.size(), picked.size());
    for (std::size_t i = 0; i < picked.size(); ++i) EXPECT_EQ(again[i].id, picked[i].id);
}

TEST(TraceModel, EnumerateSkipsImageOnlyTrace) {
    Trace t;
    t.meta.page_url = "https://example.com/";
    RequestRecord image;
    image.id = "r1";
    image.method = "GET";
    image.url = "https://example.com/hero.png";
    image.timestamp = 1;
    t.requests = {image};
    EXPECT_TRUE(enumerate_requests(t).empty());
}

TEST(TraceModel, CookieFieldsParseFromHeader) {
    RequestRecord r;
    r.headers = {{"Cookie", "uid=eeec99c83e911b00583ffc4bc3e34060; pref=dark"}};
    std::vector<RequestField> fields = r.cookie_fields();
    ASSERT_EQ(fields.size(), 2u);
    EXPECT_EQ(fields[0].name, "uid");
    EXPECT_EQ(fields[0].value, "eeec99c83e911b00583ffc4bc3e34060");
    EXPECT_EQ(fields[1].name, "pref");
    EXPECT_EQ(fields[1].kind, FieldKind::cookie);
}

TEST(TraceModel, QueryFieldsPreserveOrder) {
    RequestRecord r;
    r.url = "https://www.temu.com/p.html?goods_id=601099526089385&sku_id=17592258865022&_x_ns_msclkid=eeec99c83e911b00583ffc4bc3e34060";
    std::vector<RequestField> fields = r.query_fields();
    ASSERT_EQ(fields.size(), 3u);
    EXPECT_EQ(fields[0].name, "goods_id");
    EXPECT_EQ(fields[2].name, "_x_ns_msclkid");
    EXPECT_EQ(fields[2].value, "eeec99c83e911b00583ffc4bc3e34060");
}
