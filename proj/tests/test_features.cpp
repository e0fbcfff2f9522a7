#include "trackdiff/features.hpp"

#include <gtest/gtest.h>

using namespace trackdiff;

namespace {

ConsensusDiff neutral_diff() {
    ConsensusDiff d;
    d.components = all_components();
    for (const char* key :
         {"sim.embedding", "sim.region_vips", "sim.region_cormer", "sim.region_main",
          "sim.region_section", "sim.text", "sim.main_text", "sim.style", "sim.structure",
          "sim.html"})
        d.scalars[key] = 1.0;
    return d;
}

void add_listener_item(ConsensusDiff& d, const std::string& key, const std::string& event_type,
                       const std::string& tag) {
    d.items["listener_removed:" + key] = {
        DiffItem{"listener_removed",
                 json{{"event_type", event_type}, {"tag", tag}, {"handler_hash", key}}},
        9};
}

}  // namespace

TEST(Registry, BreakageShapeMatchesTheFeatureTables) {
    const FeatureRegistry& reg = registry(RegistryKind::breakage);
    EXPECT_EQ(reg.size(), 63u);
    EXPECT_EQ(reg.id(), "breakage-v1");

    int appearance = 0, input = 0, request = 0, storage = 0;
    for (const FeatureDef& def : reg.defs()) {
        appearance += def.group == FeatureGroup::appearance;
        input += def.group == FeatureGroup::input;
        request += def.group == FeatureGroup::request;
        storage += def.group == FeatureGroup::storage_temporal;
    }
    EXPECT_EQ(appearance, 33);
    EXPECT_EQ(input, 6);
    EXPECT_EQ(request, 18);
    EXPECT_EQ(storage, 6);
}

TEST(Registry, StableOrderingAcrossCalls) {
    const FeatureRegistry& a = registry(RegistryKind::breakage);
    const FeatureRegistry& b = registry(RegistryKind::breakage);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.at(i).name, b.at(i).name);
    EXPECT_EQ(&a, &b);
}

TEST(Registry, ImportanceTableNamesResolveUniquely) {
    // Every importance-table alias resolves in exactly one registry.
    const FeatureRegistry& breakage = registry(RegistryKind::breakage);
    const FeatureRegistry& tracking = registry(RegistryKind::tracking);

    const std::vector<std::string> breakage_aliases = {
        "delta console logs",
        "delta page load time",
        "delta event listeners",
        "delta cookies values",
        "delta document height",
        "delta CSS classes",
        "delta DOM tree",
        "delta listeners on interactable elements",
        "delta HTML tag sequences",
        "delta full-paged screenshot as a feature vector",
    };
    const std::vector<std::string> tracking_aliases = {
        "delta parameters of the blocked request",
        "delta URL length of the blocked request",
        "delta response size of the blocked request",
        "delta times first party appear in the blocked request",
        "delta 'eval' appear in the response of the blocked request",
        "delta high entropy fingerprinting function executed",
        "delta third party requests blocked",
        "delta requests blocked",
        "delta third party requests with sensitive information",
        "delta 'eval' in the ancestors nodes of the blocked request",
    };
    for (const std::string& alias : breakage_aliases) {
        EXPECT_GE(breakage.index_of_alias(alias), 0) << alias;
        EXPECT_EQ(tracking.index_of_alias(alias), -1) << alias;
    }
    for (const std::string& alias : tracking_aliases) {
        EXPECT_GE(tracking.index_of_alias(alias), 0) << alias;
        EXPECT_EQ(breakage.index_of_alias(alias), -1) << alias;
    }
}

TEST(Registry, TrackingRegistryShape) {
    const FeatureRegistry& reg = registry(RegistryKind::tracking);
    EXPECT_EQ(reg.id(), "tracking-v1");
    EXPECT_EQ(reg.size(), 14u);
    for (const FeatureDef& def : reg.defs()) EXPECT_EQ(def.group, FeatureGroup::tracking);
}

TEST(Registry, CsvExportHasHeaderAndAllRows) {
    std::string csv = registry(RegistryKind::breakage).to_csv();
    EXPECT_TRUE(csv.starts_with("index,name,group\n"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 64);  // header + 63 rows
    EXPECT_NE(csv.find("\"# requests blocked\",request"), std::string::npos);
}

TEST(BreakageVector, NeutralDiffIsZero) {
    FeatureVector v = breakage_vector(neutral_diff());
    ASSERT_EQ(v.values.size(), 63u);
    EXPECT_EQ(v.registry_id, "breakage-v1");
    for (std::size_t i = 0; i < v.values.size(); ++i)
        EXPECT_EQ(v.values[i], 0.0) << registry(RegistryKind::breakage).at(i).name;
}

TEST(BreakageVector, HandFilledListenerAndLoadTimeFixture) {
    // Two listeners on span targets removed, page 1.5 s slower; everything
    // else untouched.
    ConsensusDiff d = neutral_diff();
    add_listener_item(d, "mousemove|span|aa", "mousemove", "span");
    add_listener_item(d, "mousemove|span|bb", "mousemove", "span");
    d.scalars["ms.load_time_delta"] = -1500.0;

    const FeatureRegistry& reg = registry(RegistryKind::breakage);
    FeatureVector v = breakage_vector(d);

    std::map<std::string, double> expected = {
        {"Listeners", 2.0},
        {"Generic listeners", 2.0},
        {"Load time", 1.5},
    };
    for (std::size_t i = 0; i < reg.size(); ++i) {
        auto it = expected.find(reg.at(i).name);
        double want = it == expected.end() ? 0.0 : it->second;
        EXPECT_EQ(v.values[i], want) << reg.at(i).name;
    }
}

TEST(BreakageVector, ListenerCategoriesFollowTargetTag) {
    ConsensusDiff d = neutral_diff();
    add_listener_item(d, "click|button|cc", "click", "button");

    const FeatureRegistry& reg = registry(RegistryKind::breakage);
    FeatureVector v = breakage_vector(d);
    auto value_of = [&](const char* name) {
        return v.values[static_cast<std::size_t>(reg.index_of(name))];
    };
    EXPECT_EQ(value_of("Specific listeners"), 1.0);  // interactable
    EXPECT_EQ(value_of("Critical listeners"), 1.0);
    EXPECT_EQ(value_of("Generic listeners"), 0.0);
    EXPECT_EQ(value_of("Sensitive listeners"), 0.0);
    EXPECT_EQ(value_of("Functionality related listeners"), 1.0);  // click
    EXPECT_EQ(value_of("Listeners"), 1.0);
}

TEST(BreakageVector, MissingComponentIsRejected) {
    ConsensusDiff d = neutral_diff();
    d.components.erase("appearance");
    try {
        breakage_vector(d);
        FAIL() << "expected IncompleteDiff";
    } catch (const IncompleteDiff& e) {
        EXPECT_NE(std::string(e.what()).find("appearance"), std::string::npos);
    }
}

TEST(TrackingVector, NeutralDiffWithTargetIsZero) {
    ConsensusDiff d = neutral_diff();
    TargetRef target{TargetKind::request, "https://tracker.example/t.js", std::nullopt};
    d.target = target;
    d.scalars["n.target_in_vanilla"] = 1.0;

    FeatureVector v = tracking_vector(d, target);
    ASSERT_EQ(v.values.size(), 14u);
    for (double x : v.values) EXPECT_EQ(x, 0.0);
}

TEST(TrackingVector, HandCountedTargetFixture) {
    // Blocked request had 3 query parameters, the page host once in its
    // URL, and "eval" twice in its response.
    ConsensusDiff d = neutral_diff();
    TargetRef target{TargetKind::request, "https://tracker.example/t.js?a=1&b=2&c=3", std::nullopt};
    d.target = target;
    d.scalars["n.target_in_vanilla"] = 1.0;
    d.scalars["n.target_param_delta"] = 3.0;
    d.scalars["n.target_fp_occurrence_delta"] = 1.0;
    d.scalars["n.target_resp_eval_delta"] = 2.0;

    const FeatureRegistry& reg = registry(RegistryKind::tracking);
    FeatureVector v = tracking_vector(d, target);
    EXPECT_EQ(v.values[static_cast<std::size_t>(reg.index_of("Blocked request parameters"))], 3.0);
    EXPECT_EQ(v.values[static_cast<std::size_t>(reg.index_of("First party occurrences"))], 1.0);
    EXPECT_EQ(v.values[static_cast<std::size_t>(reg.index_of("Response eval count"))], 2.0);
    EXPECT_EQ(v.values[static_cast<std::size_t>(reg.index_of("Requests blocked"))], 0.0);
}

TEST(TrackingVector, UnknownTargetIsRejected) {
    ConsensusDiff d = neutral_diff();
    TargetRef target{TargetKind::request, "https://gone.example/x.js", std::nullopt};
    d.target = target;
    d.scalars["n.target_in_vanilla"] = 0.0;
    EXPECT_THROW(tracking_vector(d, target), UnknownTarget);

    ConsensusDiff without_target = neutral_diff();
    EXPECT_THROW(tracking_vector(without_target, target), UnknownTarget);
}

TEST(TrackingVector, CountsRemovedThirdPartyRequests) {
    ConsensusDiff d = neutral_diff();
    TargetRef target{TargetKind::request, "https://tracker.example/t.js", std::nullopt};
    d.target = target;
    d.scalars["n.target_in_vanilla"] = 1.0;
    d.items["req_removed:GET|https://tracker.example/t.js"] = {
        DiffItem{"req_removed", json{{"direction", "outgoing"},
                                     {"partiness", "third"},
                                     {"storage_values", 2},
                                     {"url", "https://tracker.example/t.js"}}},
        9};
    d.items["req_removed:GET|https://cdn.page.example/app.js"] = {
        DiffItem{"req_removed", json{{"direction", "outgoing"},
                                     {"partiness", "first"},
                                     {"storage_values", 0},
                                     {"url", "https://cdn.page.example/app.js"}}},
        9};

    const FeatureRegistry& reg = registry(RegistryKind::tracking);
    FeatureVector v = tracking_vector(d, target);
    EXPECT_EQ(v.values[static_cast<std::size_t>(reg.index_of("Requests blocked"))], 2.0);
    EXPECT_EQ(v.values[static_cast<std::size_t>(reg.index_of("Third party requests blocked"))], 1.0);
    EXPECT_EQ(v.values[static_cast<std::size_t>(reg.index_of("Sensitive third party blocked"))], 1.0);
    EXPECT_EQ(v.values[static_cast<std::size_t>(reg.index_of("Storage flow count"))], 2.0);
}

TEST(FeatureVector, PureFunctionOfTheDiff) {
    ConsensusDiff d = neutral_diff();
    add_listener_item(d, "click|button|zz", "click", "button");
    d.scalars["ms.load_time_delta"] = 230.0;

    FeatureVector a = breakage_vector(d);
    FeatureVector b = breakage_vector(d);
    EXPECT_EQ(a.values, b.values);
}
