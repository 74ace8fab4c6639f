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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include "sbifuzz/spec_loader.hpp"
#include "sbifuzz/util.hpp"

namespace sbifuzz {

enum class ParamLocation { kPath, kQuery, kHeader };

std::string_view location_name(ParamLocation loc);

struct ParamSpec {
  std::string name;
  ParamLocation location = ParamLocation::kQuery;
  bool required = false;
  Json schema;                // inlined, no refs
  bool json_content = false;  // declared via `content: application/json`
  bool fuzzable = true;
  std::optional<Json> pinned_value;

  Json to_json() const;
  static ParamSpec from_json(const Json& j);
};

struct ResponseSpec {
  Json schema;  // inlined; null when the response has no body
  std::vector<std::string> headers;
};

struct HandleDescriptor {
  std::string name;    // response field, or "Location"
  std::string source;  // "body" | "location"
};

struct RequestTemplate {
  std::string template_id;    // "<METHOD> <path_template>"
  std::string method;         // upper case
  std::string path_template;  // server base path + operation path
  std::string origin;         // "http://host:port"
  std::string service;        // API name, also the OAuth scope ("nudm-sdm")
  std::string nf;             // NF name ("udm")
  bool requires_auth = false;
  std::vector<ParamSpec> path_params;
  std::vector<ParamSpec> query_params;
  std::vector<ParamSpec> header_params;
  std::optional<Json> body_schema;
  std::string body_media_type;
  bool body_required = false;
  std::set<std::string> pinned_fields;  // body members held fixed
  std::map<std::string, ResponseSpec> declared_responses;
  std::vector<HandleDescriptor> produces;
  std::vector<std::string> consumes;  // path slots fed by handles

  const ParamSpec* find_param(std::string_view name) const;
  std::vector<const ParamSpec*> all_params() const;
  bool declares(int status) const;
  bool declares_default() const;

  Json to_json() const;
  static RequestTemplate from_json(const Json& j);
};

struct DependencyEdge {
  std::string producer;
  std::string consumer;
  std::string handle;  // consumer path slot
  std::string field;   // producer response field, or "Location"

  auto key() const { return std::tie(producer, consumer, handle); }
  bool operator<(const DependencyEdge& o) const { return key() < o.key(); }
  bool operator==(const DependencyEdge& o) const { return key() == o.key(); }
};

struct DependencyGraph {
  std::vector<std::string> nodes;
  std::vector<DependencyEdge> edges;  // sorted by (producer, consumer, handle)

  std::vector<DependencyEdge> edges_into(const std::string& consumer) const;
};

struct FuzzDictionary {
  std::vector<std::string> strings;
  std::vector<std::int64_t> integers;
  std::vector<double> numbers;
  std::vector<bool> booleans;
  std::vector<std::string> uuids;
  std::vector<std::string> uris;
  std::vector<std::string> datetimes;
  std::vector<std::string> enum_outside;
  // name -> enum members / examples from the API documents, plus out-of-enum probe
  std::map<std::string, std::vector<Json>> spec_values;
  std::map<std::string, std::vector<Json>> overlay;

  static FuzzDictionary defaults();

  // Ordered candidate values for a scalar slot: overlay first, then spec
  // values, then the type pool (skipped for enums). Pinned slots only see
  // the overlay when it has entries.
  std::vector<Json> candidates(const std::string& name, const Json& schema,
                               bool pinned = false) const;

  Json to_json() const;
  static FuzzDictionary from_json(const Json& j);
};

struct PinPolicy {
  bool pin_authorization = true;
  // names to hold fixed; a value pins to that literal
  std::map<std::string, std::optional<Json>> names;
};

struct Grammar {
  std::vector<RequestTemplate> templates;
  DependencyGraph graph;
  FuzzDictionary dictionary;
  std::string seed_spec_hash;

  const RequestTemplate* find(const std::string& template_id) const;

  Json to_json() const;
  static Grammar from_json(const Json& j);
  static Grammar load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

// Collapses allOf (merged) and oneOf/anyOf (first branch).
Json effective_schema(const Json& schema);
// "object" | "array" | "string" | "integer" | "number" | "boolean" | "any"
std::string schema_type(const Json& schema);

std::vector<RequestTemplate> compile(const ResolvedSpec& spec);

// Handle-name matching: case, '-' and '_' insensitive; trailing "id"/"ref"
// dropped when something remains.
std::string normalize_handle(std::string_view name);
DependencyGraph infer_dependencies(const std::vector<RequestTemplate>& templates);
// Fills each template's `consumes` from the graph.
void apply_dependencies(std::vector<RequestTemplate>& templates, const DependencyGraph& graph);

FuzzDictionary build_dictionary(const std::vector<RequestTemplate>& templates,
                                const std::map<std::string, std::vector<Json>>& overlay = {});

RequestTemplate annotate_fuzzable(const RequestTemplate& tmpl, const PinPolicy& policy,
                                  std::vector<Diagnostic>* warnings = nullptr);

Grammar compile_grammar(const std::vector<ResolvedSpec>& specs,
                        const std::map<std::string, std::vector<Json>>& overlay = {},
                        const PinPolicy& policy = {},
                        std::vector<Diagnostic>* warnings = nullptr);

}  // namespace sbifuzz
