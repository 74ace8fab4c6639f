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

#include "sbifuzz/error.hpp"
#include "sbifuzz/spec_loader.hpp"
#include "support.hpp"

namespace sbifuzz {
namespace {

using testing::fixtures;

// Independent walker: every `$ref` string in the tree.
void refs_in(const Json& node, std::vector<std::string>& out) {
  if (node.is_object()) {
    for (const auto& [k, v] : node.items()) {
      if (k == "$ref" && v.is_string()) out.push_back(v.get<std::string>());
      refs_in(v, out);
    }
  } else if (node.is_array()) {
    for (const auto& v : node) refs_in(v, out);
  }
}

void expect_self_contained(const Json& doc) {
  std::vector<std::string> refs;
  refs_in(doc, refs);
  for (const auto& r : refs) {
    ASSERT_FALSE(r.empty());
    EXPECT_EQ(r[0], '#') << r;
    EXPECT_TRUE(doc.contains(Json::json_pointer(r.substr(1)))) << r;
  }
}

TEST(ParseDocument, KeepsExternalRefUntouched) {
  const auto raw = load_document(fixtures() / "corpus" / "nudm_sdm.yaml");
  std::vector<std::string> refs;
  refs_in(raw.document, refs);
  EXPECT_NE(std::find(refs.begin(), refs.end(), "TS29571_CommonData.yaml#/components/schemas/SupportedFeature"),
            refs.end());
}

TEST(ParseDocument, OnePathNoRefs) {
  const auto raw = parse_document(R"(openapi: 3.0.0
info: {title: t, version: "1"}
paths:
  /a:
    get:
      responses: {'200': {description: ok}}
)",
                                  "one.yaml");
  EXPECT_EQ(raw.document["paths"].size(), 1u);
  std::vector<std::string> refs;
  refs_in(raw.document, refs);
  EXPECT_TRUE(refs.empty());
}

TEST(ParseDocument, RejectsSwagger2) {
  try {
    parse_document("openapi: \"2.0\"\ninfo: {title: t, version: '1'}\npaths: {}\n", "old.yaml");
    FAIL() << "accepted 2.0";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnsupportedVersion);
  }
}

TEST(ResolveRefs, CorpusIsSelfContained) {
  for (const auto& p : testing::corpus_specs()) {
    SCOPED_TRACE(p.string());
    const auto spec = load_resolved(p, {fixtures() / "common"});
    expect_self_contained(spec.document);
    for (const auto& url : spec.server_urls) EXPECT_TRUE(has_explicit_port(url)) << url;
  }
}

TEST(ResolveRefs, SupportedFeatureBecomesLocalComponent) {
  const auto spec = load_resolved(fixtures() / "corpus" / "nudm_sdm.yaml", {fixtures() / "common"});
  Json schema;
  for (const auto& p : spec.document["paths"]["/shared-data"]["get"]["parameters"]) {
    if (p["name"] == "supported-features") schema = p["schema"];
  }
  EXPECT_EQ(schema.value("$ref", ""), "#/components/schemas/SupportedFeature");
  EXPECT_TRUE(spec.component_index.count("#/components/schemas/SupportedFeature"));
}

TEST(ResolveRefs, InternalOnlySpecIsUnchanged) {
  const auto raw = load_document(fixtures() / "deps" / "subscriptions.yaml");
  const auto spec = resolve_refs(raw, memory_resolver({}));
  EXPECT_EQ(spec.document, raw.document);
}

TEST(ResolveRefs, MutualRecursionAcrossFiles) {
  const auto a = parse_document(R"(openapi: 3.0.0
info: {title: a, version: "1"}
servers: [{url: "http://h:1/x/v1"}]
paths:
  /a:
    get:
      responses:
        '200':
          description: ok
          content:
            application/json:
              schema: {$ref: 'b.yaml#/components/schemas/B'}
components:
  schemas:
    A:
      type: object
      properties:
        b: {$ref: 'b.yaml#/components/schemas/B'}
)",
                                "a.yaml");
  const std::string b = R"(openapi: 3.0.0
info: {title: b, version: "1"}
paths: {}
components:
  schemas:
    B:
      type: object
      properties:
        a: {$ref: 'a.yaml#/components/schemas/A'}
)";
  std::map<std::string, std::string> files{{"b.yaml", b}, {"a.yaml", a.document.dump()}};
  const auto spec = resolve_refs(a, memory_resolver(files));
  expect_self_contained(spec.document);
  EXPECT_TRUE(spec.document["components"]["schemas"].contains("A"));
  EXPECT_TRUE(spec.document["components"]["schemas"].contains("B"));
}

TEST(ResolveRefs, IsIdempotent) {
  const auto once = load_resolved(fixtures() / "corpus" / "nudm_sdm.yaml", {fixtures() / "common"});
  const auto twice = resolve_refs(as_raw(once), memory_resolver({}));
  EXPECT_EQ(canonical_dump(once.document), canonical_dump(twice.document));
}

TEST(ResolveRefs, DanglingRefFails) {
  const auto raw = parse_document(R"(openapi: 3.0.0
info: {title: t, version: "1"}
paths:
  /a:
    get:
      responses:
        '200':
          description: ok
          content:
            application/json:
              schema: {$ref: '#/components/schemas/Nope'}
)",
                                  "d.yaml");
  EXPECT_THROW(resolve_refs(raw, memory_resolver({})), Error);
}

ResolvedSpec api_root_spec(const std::string& server) {
  return resolve_refs(parse_document("openapi: 3.0.0\ninfo: {title: t, version: '1'}\nservers: [{url: '" + server +
                                         "'}]\npaths: {}\n",
                                     "s.yaml"),
                      memory_resolver({}));
}

TEST(RewriteServers, ApiRootFromHostMap) {
  HostMap hosts;
  hosts.entries["udm"] = "udm:8000";
  const auto spec = rewrite_servers(api_root_spec("{apiRoot}/nudm-sdm/v2"), hosts);
  ASSERT_EQ(spec.server_urls.size(), 1u);
  EXPECT_EQ(spec.server_urls[0], "http://udm:8000/nudm-sdm/v2");
  EXPECT_EQ(spec.document["servers"][0]["url"], "http://udm:8000/nudm-sdm/v2");
}

TEST(RewriteServers, AbsoluteUrlIsKept) {
  HostMap hosts;
  hosts.entries["udm"] = "udm:8000";
  const auto spec = rewrite_servers(api_root_spec("http://udm:8000/nudm-sdm/v2"), hosts);
  EXPECT_EQ(spec.server_urls[0], "http://udm:8000/nudm-sdm/v2");
}

TEST(RewriteServers, UnknownServiceWithEmptyHostMap) {
  try {
    rewrite_servers(api_root_spec("{apiRoot}/nxyz-foo/v1"), HostMap{});
    FAIL() << "rewrote without a host";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownService);
  }
}

TEST(ApiName, DerivesNf) {
  EXPECT_EQ(nf_from_api_name("nudm-sdm"), "udm");
  EXPECT_EQ(nf_from_api_name("nnssf-nssaiavailability"), "nssf");
}

TEST(ValidateSpec, CorpusIsClean) {
  for (const auto& p : testing::corpus_specs()) {
    EXPECT_TRUE(validate_spec(load_resolved(p, {fixtures() / "common"})).empty()) << p;
  }
}

TEST(ValidateSpec, MissingResponsesAndUnreachableComponent) {
  const auto spec = resolve_refs(parse_document(R"(openapi: 3.0.0
info: {title: t, version: "1"}
servers: [{url: "http://h:1/x/v1"}]
paths:
  /a:
    get: {}
components:
  schemas:
    Orphan: {type: string}
)",
                                                "v.yaml"),
                                 memory_resolver({}));
  const auto diags = validate_spec(spec);
  bool no_responses = false, unreachable = false;
  for (const auto& d : diags) {
    if (d.kind == "no-responses") {
      no_responses = true;
      EXPECT_NE(d.location.find("GET /a"), std::string::npos);
    }
    if (d.kind == "unreachable-component") unreachable = true;
  }
  EXPECT_TRUE(no_responses);
  EXPECT_TRUE(unreachable);
}

TEST(Bundle, YamlOnDiskReloadsEqual) {
  const auto dir = testing::scratch_dir("bundle-unit");
  const auto spec = load_resolved(fixtures() / "corpus" / "nudm_sdm.yaml", {fixtures() / "common"});
  const auto path = write_bundle(spec, dir);
  EXPECT_EQ(path.filename(), "nudm_sdm.yaml");
  EXPECT_EQ(canonical_dump(load_document(path).document), canonical_dump(spec.document));
}

TEST(HostMapJson, RejectsBadPort) {
  EXPECT_THROW(HostMap::from_json(Json::parse(R"({"hosts":{"udm":"udm:notaport"}})")), Error);
  const auto h = HostMap::from_json(Json::parse(R"({"hosts":{"udm":"127.0.0.1:29511"}})"));
  EXPECT_EQ(h.entries.at("udm"), "127.0.0.1:29511");
}

}  // namespace
}  // namespace sbifuzz
