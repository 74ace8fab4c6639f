// Copyright 2026 The sbifuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "sbifuzz/grammar.hpp"
#include "support.hpp"

namespace sbifuzz {
namespace {

using testing::fixtures;

ResolvedSpec inline_spec(const std::string& paths) {
  return resolve_refs(parse_document("openapi: 3.0.0\ninfo: {title: t, version: '1'}\nservers: [{url: "
                                     "'http://h:9000/nxyz-t/v1'}]\npaths:\n" + paths,
                                     "inline.yaml"),
                      memory_resolver({}));
}

std::vector<RequestTemplate> udm_templates() {
  return compile(load_resolved(fixtures() / "corpus" / "nudm_sdm.yaml", {fixtures() / "common"}));
}

const RequestTemplate& find(const std::vector<RequestTemplate>& ts, const std::string& id) {
  for (const auto& t : ts) {
    if (t.template_id == id) return t;
  }
  throw std::runtime_error("no template " + id);
}

TEST(Compile, SharedDataHasOptionalQueryParams) {
  const auto ts = udm_templates();
  const auto& t = find(ts, "GET /nudm-sdm/v2/shared-data");
  const auto* ids = t.find_param("shared-data-ids");
  const auto* features = t.find_param("supported-features");
  ASSERT_TRUE(ids && features);
  EXPECT_FALSE(ids->required);
  EXPECT_FALSE(features->required);
  EXPECT_EQ(features->location, ParamLocation::kQuery);
  EXPECT_TRUE(features->fuzzable);
}

TEST(Compile, OneTemplatePerOperation) {
  for (const auto& p : testing::corpus_specs()) {
    const auto spec = load_resolved(p, {fixtures() / "common"});
    std::size_t ops = 0;
    for (const auto& [path, item] : spec.document["paths"].items()) {
      for (const auto& m : kHttpMethods) ops += item.contains(std::string(m)) ? 1 : 0;
    }
    const auto ts = compile(spec);
    EXPECT_EQ(ts.size(), ops) << p;
    for (const auto& t : ts) {
      EXPECT_FALSE(t.declared_responses.empty()) << t.template_id;
      for (const auto& slot : t.path_params) {
        EXPECT_NE(t.path_template.find("{" + slot.name + "}"), std::string::npos);
      }
    }
  }
}

TEST(Compile, SingleGetWithoutParams) {
  const auto ts = compile(inline_spec("  /ping:\n    get:\n      responses: {'200': {description: ok}}\n"));
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].template_id, "GET /nxyz-t/v1/ping");
  EXPECT_TRUE(ts[0].path_params.empty());
  EXPECT_TRUE(ts[0].query_params.empty());
  EXPECT_TRUE(ts[0].header_params.empty());
}

TEST(Compile, BdtPoliciesPostHasBody) {
  const auto ts = compile(load_resolved(fixtures() / "corpus" / "npcf_bdtpolicycontrol.yaml", {fixtures() / "common"}));
  const auto& t = find(ts, "POST /npcf-bdtpolicycontrol/v1/bdtpolicies");
  EXPECT_TRUE(t.body_schema.has_value());
}

TEST(Compile, IsDeterministic) {
  const auto a = compile_grammar({load_resolved(fixtures() / "corpus" / "nudm_sdm.yaml", {fixtures() / "common"})});
  const auto b = compile_grammar({load_resolved(fixtures() / "corpus" / "nudm_sdm.yaml", {fixtures() / "common"})});
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(NormalizeHandle, MatchingRule) {
  EXPECT_EQ(normalize_handle("subscriptionId"), normalize_handle("subscription-id"));
  EXPECT_EQ(normalize_handle("Subscription_ID"), normalize_handle("subscription"));
  EXPECT_EQ(normalize_handle("bdtRef"), "bdt");
  EXPECT_EQ(normalize_handle("id"), "id");
}

TEST(InferDependencies, PostToDeleteOnSubscriptionId) {
  const auto ts = compile(load_resolved(fixtures() / "deps" / "subscriptions.yaml"));
  const auto g = infer_dependencies(ts);
  std::set<std::tuple<std::string, std::string, std::string>> got;
  for (const auto& e : g.edges) got.emplace(e.producer, e.consumer, e.handle);
  EXPECT_TRUE(got.count({"POST /nsub-test/v1/subscriptions", "DELETE /nsub-test/v1/subscriptions/{subscriptionId}",
                         "subscriptionId"}));
  EXPECT_TRUE(got.count({"POST /nsub-test/v1/subscriptions", "GET /nsub-test/v1/subscriptions/{subscriptionId}",
                         "subscriptionId"}));
  EXPECT_EQ(got.size(), 2u);
  EXPECT_TRUE(std::is_sorted(g.edges.begin(), g.edges.end()));
}

TEST(InferDependencies, UnrelatedGetsHaveNoEdges) {
  const auto ts = compile(inline_spec(R"(  /a:
    get:
      responses:
        '200':
          description: ok
          content:
            application/json:
              schema: {type: object, properties: {name: {type: string}}}
  /b/{other}:
    get:
      parameters: [{name: other, in: path, required: true, schema: {type: string}}]
      responses: {'200': {description: ok}}
)"));
  EXPECT_TRUE(infer_dependencies(ts).edges.empty());
}

TEST(InferDependencies, SharedDataSubscriptionsIntoDelete) {
  const auto g = infer_dependencies(udm_templates());
  bool found = false;
  for (const auto& e : g.edges) {
    found = found || (e.producer == "POST /nudm-sdm/v2/shared-data-subscriptions" &&
                      e.consumer == "DELETE /nudm-sdm/v2/shared-data-subscriptions/{subscriptionId}");
  }
  EXPECT_TRUE(found);
}

TEST(Dictionary, EnumPoolHasMembersAndOneProbe) {
  const auto ts = compile(inline_spec(R"(  /e:
    get:
      parameters:
        - {name: mode, in: query, schema: {type: string, enum: [A, B]}}
      responses: {'200': {description: ok}}
)"));
  const auto dict = build_dictionary(ts);
  const auto c = dict.candidates("mode", ts[0].find_param("mode")->schema);
  std::set<std::string> values;
  for (const auto& v : c) values.insert(v.get<std::string>());
  EXPECT_TRUE(values.count("A"));
  EXPECT_TRUE(values.count("B"));
  EXPECT_EQ(values.size(), 3u);
}

TEST(Dictionary, EmptyOverlayKeepsDefaults) {
  const auto dict = build_dictionary(udm_templates());
  const auto d = FuzzDictionary::defaults();
  EXPECT_EQ(dict.strings, d.strings);
  EXPECT_EQ(dict.integers, d.integers);
  EXPECT_EQ(dict.uuids, d.uuids);
  EXPECT_TRUE(dict.overlay.empty());
  const std::vector<std::string> expected_strings = {"", "A", std::string(1024, 'A'), "%s%n"};
  for (std::size_t i = 0; i < expected_strings.size(); ++i) EXPECT_EQ(d.strings[i], expected_strings[i]);
  EXPECT_EQ(d.integers, (std::vector<std::int64_t>{0, 1, -1, 2147483647}));
}

TEST(Dictionary, OverlayComesFirst) {
  const auto dict = build_dictionary(udm_templates(), {{"supi", {Json("imsi-208930000000003")}}});
  const auto c = dict.candidates("supi", Json{{"type", "string"}});
  ASSERT_FALSE(c.empty());
  EXPECT_EQ(c[0], "imsi-208930000000003");
}

TEST(Dictionary, InRangeIntegersFirst) {
  const auto dict = FuzzDictionary::defaults();
  const auto c = dict.candidates("limit", Json{{"type", "integer"}, {"minimum", 1}});
  ASSERT_FALSE(c.empty());
  EXPECT_GE(c[0].get<std::int64_t>(), 1);
}

TEST(PinPolicy, DefaultPinsAuthorizationOnly) {
  const auto ts = udm_templates();
  const auto& t = find(ts, "GET /nudm-sdm/v2/shared-data");
  std::vector<Diagnostic> warnings;
  const auto a = annotate_fuzzable(t, PinPolicy{}, &warnings);
  EXPECT_TRUE(a.find_param("supported-features")->fuzzable);
  for (const auto* p : a.all_params()) {
    if (to_lower(p->name) == "authorization") EXPECT_FALSE(p->fuzzable);
  }
}

TEST(PinPolicy, PinnedSupiUsesOverlayOnly) {
  const auto ts = udm_templates();
  const auto& t = find(ts, "GET /nudm-sdm/v2/{supi}/sm-data");
  PinPolicy policy;
  policy.names["supi"] = std::nullopt;
  const auto a = annotate_fuzzable(t, policy);
  const auto* supi = a.find_param("supi");
  ASSERT_TRUE(supi);
  EXPECT_FALSE(supi->fuzzable);
  auto dict = build_dictionary({a}, {{"supi", {Json("imsi-208930000000003")}}});
  EXPECT_EQ(dict.candidates("supi", supi->schema, true), std::vector<Json>{Json("imsi-208930000000003")});
}

TEST(PinPolicy, UnknownNameWarnsAndLeavesTemplate) {
  const auto ts = udm_templates();
  const auto& t = find(ts, "GET /nudm-sdm/v2/shared-data");
  PinPolicy policy;
  policy.names["no-such-param"] = std::nullopt;
  std::vector<Diagnostic> warnings;
  const auto a = annotate_fuzzable(t, policy, &warnings);
  const auto baseline = annotate_fuzzable(t, PinPolicy{});
  EXPECT_EQ(a.to_json(), baseline.to_json());
  EXPECT_FALSE(warnings.empty());
}

TEST(GrammarJson, RoundTrip) {
  const auto g = compile_grammar({load_resolved(fixtures() / "corpus" / "nudm_sdm.yaml", {fixtures() / "common"})},
                                 testing::testbed_overlay());
  const auto dir = testing::scratch_dir("grammar");
  g.save(dir / "g.json");
  EXPECT_EQ(Grammar::load(dir / "g.json").to_json().dump(), g.to_json().dump());
}

}  // namespace
}  // namespace sbifuzz
