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

#include "sbifuzz/grammar.hpp"

#include <algorithm>
#include <regex>

#include "sbifuzz/error.hpp"

namespace sbifuzz {

std::string_view location_name(ParamLocation loc) {
  switch (loc) {
    case ParamLocation::kPath: return "path";
    case ParamLocation::kQuery: return "query";
    case ParamLocation::kHeader: return "header";
  }
  return "query";
}

namespace {

ParamLocation location_from(std::string_view s) {
  if (s == "path") return ParamLocation::kPath;
  if (s == "header") return ParamLocation::kHeader;
  return ParamLocation::kQuery;
}

void push_unique(std::vector<Json>& values, const Json& v) {
  if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
}

}  // namespace

// ---------------------------------------------------------------- schemas

Json effective_schema(const Json& schema) {
  if (!schema.is_object()) return schema;
  if (schema.contains("allOf") && schema.at("allOf").is_array()) {
    Json merged = schema;
    merged.erase("allOf");
    for (const auto& part : schema.at("allOf")) {
      const Json sub = effective_schema(part);
      if (!sub.is_object()) continue;
      for (const auto& [k, v] : sub.items()) {
        if (k == "properties" && v.is_object()) {
          for (const auto& [pk, pv] : v.items()) merged["properties"][pk] = pv;
        } else if (k == "required" && v.is_array()) {
          for (const auto& r : v) {
            if (!merged.contains("required")) merged["required"] = Json::array();
            auto& req = merged["required"];
            if (std::find(req.begin(), req.end(), r) == req.end()) req.push_back(r);
          }
        } else if (!merged.contains(k)) {
          merged[k] = v;
        }
      }
    }
    return effective_schema(merged);
  }
  for (const char* key : {"oneOf", "anyOf"}) {
    if (schema.contains(key) && schema.at(key).is_array() && !schema.at(key).empty()) {
      Json rest = schema;
      rest.erase(key);
      Json first = effective_schema(schema.at(key).at(0));
      if (first.is_object()) {
        for (const auto& [k, v] : rest.items()) {
          if (!first.contains(k)) first[k] = v;
        }
      }
      return first;
    }
  }
  return schema;
}

std::string schema_type(const Json& schema) {
  const Json eff = effective_schema(schema);
  if (!eff.is_object()) return "any";
  if (eff.contains("type")) {
    const auto& t = eff.at("type");
    if (t.is_string()) return t.get<std::string>();
    if (t.is_array()) {
      for (const auto& item : t) {
        if (item.is_string() && item.get<std::string>() != "null") return item.get<std::string>();
      }
    }
  }
  if (eff.contains("properties")) return "object";
  if (eff.contains("items")) return "array";
  if (eff.contains("enum") && eff.at("enum").is_array() && !eff.at("enum").empty()) {
    const auto& first = eff.at("enum").at(0);
    if (first.is_string()) return "string";
    if (first.is_number_integer()) return "integer";
    if (first.is_number()) return "number";
    if (first.is_boolean()) return "boolean";
  }
  return "any";
}

namespace {

bool value_matches(const Json& value, const Json& schema) {
  const std::string type = schema_type(schema);
  if (type == "string") return value.is_string();
  if (type == "integer") return value.is_number_integer();
  if (type == "number") return value.is_number();
  if (type == "boolean") return value.is_boolean();
  if (type == "array") return value.is_array();
  if (type == "object") return value.is_object();
  return true;
}

Json inline_schema(const Json& node, const std::map<std::string, Json>& index,
                   std::vector<std::string>& stack) {
  if (node.is_object()) {
    auto it = node.find("$ref");
    if (it != node.end() && it->is_string()) {
      const std::string ref = it->get<std::string>();
      if (std::find(stack.begin(), stack.end(), ref) != stack.end() || stack.size() > 32) {
        return Json{{"type", "object"}, {"x-recursive-ref", ref}};
      }
      auto target = index.find(ref);
      if (target == index.end()) throw Error(Errc::kDanglingRef, ref);
      stack.push_back(ref);
      Json out = inline_schema(target->second, index, stack);
      stack.pop_back();
      return out;
    }
    Json out = Json::object();
    for (const auto& [k, v] : node.items()) out[k] = inline_schema(v, index, stack);
    return out;
  }
  if (node.is_array()) {
    Json out = Json::array();
    for (const auto& v : node) out.push_back(inline_schema(v, index, stack));
    return out;
  }
  return node;
}

Json inline_all(const Json& node, const ResolvedSpec& spec) {
  std::vector<std::string> stack;
  return inline_schema(node, spec.component_index, stack);
}

std::string pick_media_type(const Json& content) {
  for (const char* preferred : {"application/json", "application/problem+json",
                                "application/x-www-form-urlencoded"}) {
    if (content.contains(preferred)) return preferred;
  }
  return content.empty() ? "" : content.begin().key();
}

}  // namespace

// ---------------------------------------------------------------- templates

const ParamSpec* RequestTemplate::find_param(std::string_view name) const {
  for (const auto* p : all_params()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

std::vector<const ParamSpec*> RequestTemplate::all_params() const {
  std::vector<const ParamSpec*> out;
  for (const auto& p : path_params) out.push_back(&p);
  for (const auto& p : query_params) out.push_back(&p);
  for (const auto& p : header_params) out.push_back(&p);
  return out;
}

bool RequestTemplate::declares(int status) const {
  const std::string code = std::to_string(status);
  if (declared_responses.count(code)) return true;
  const std::string range = code.substr(0, 1) + "XX";
  return declared_responses.count(range) > 0 ||
         declared_responses.count(to_lower(range)) > 0;
}

bool RequestTemplate::declares_default() const { return declared_responses.count("default") > 0; }

Json ParamSpec::to_json() const {
  Json j;
  j["name"] = name;
  j["in"] = location_name(location);
  j["required"] = required;
  j["schema"] = schema;
  j["json_content"] = json_content;
  j["fuzzable"] = fuzzable;
  if (pinned_value) j["pinned_value"] = *pinned_value;
  return j;
}

ParamSpec ParamSpec::from_json(const Json& j) {
  ParamSpec p;
  p.name = j.at("name").get<std::string>();
  p.location = location_from(j.at("in").get<std::string>());
  p.required = j.value("required", false);
  p.schema = j.value("schema", Json::object());
  p.json_content = j.value("json_content", false);
  p.fuzzable = j.value("fuzzable", true);
  if (j.contains("pinned_value")) p.pinned_value = j.at("pinned_value");
  return p;
}

Json RequestTemplate::to_json() const {
  Json j;
  j["template_id"] = template_id;
  j["method"] = method;
  j["path_template"] = path_template;
  j["origin"] = origin;
  j["service"] = service;
  j["nf"] = nf;
  j["requires_auth"] = requires_auth;
  auto params = [](const std::vector<ParamSpec>& ps) {
    Json arr = Json::array();
    for (const auto& p : ps) arr.push_back(p.to_json());
    return arr;
  };
  j["path_params"] = params(path_params);
  j["query_params"] = params(query_params);
  j["header_params"] = params(header_params);
  j["body_schema"] = body_schema ? *body_schema : Json(nullptr);
  j["body_media_type"] = body_media_type;
  j["body_required"] = body_required;
  j["pinned_fields"] = Json::array();
  for (const auto& f : pinned_fields) j["pinned_fields"].push_back(f);
  j["declared_responses"] = Json::object();
  for (const auto& [code, resp] : declared_responses) {
    j["declared_responses"][code] = {{"schema", resp.schema}, {"headers", resp.headers}};
  }
  j["produces"] = Json::array();
  for (const auto& h : produces) j["produces"].push_back({{"name", h.name}, {"source", h.source}});
  j["consumes"] = consumes;
  return j;
}

RequestTemplate RequestTemplate::from_json(const Json& j) {
  RequestTemplate t;
  t.template_id = j.at("template_id").get<std::string>();
  t.method = j.at("method").get<std::string>();
  t.path_template = j.at("path_template").get<std::string>();
  t.origin = j.value("origin", "");
  t.service = j.value("service", "");
  t.nf = j.value("nf", "");
  t.requires_auth = j.value("requires_auth", false);
  for (const auto& p : j.at("path_params")) t.path_params.push_back(ParamSpec::from_json(p));
  for (const auto& p : j.at("query_params")) t.query_params.push_back(ParamSpec::from_json(p));
  for (const auto& p : j.at("header_params")) t.header_params.push_back(ParamSpec::from_json(p));
  if (j.contains("body_schema") && !j.at("body_schema").is_null()) t.body_schema = j.at("body_schema");
  t.body_media_type = j.value("body_media_type", "");
  t.body_required = j.value("body_required", false);
  if (j.contains("pinned_fields")) {
    for (const auto& f : j.at("pinned_fields")) t.pinned_fields.insert(f.get<std::string>());
  }
  for (const auto& [code, resp] : j.at("declared_responses").items()) {
    ResponseSpec r;
    r.schema = resp.value("schema", Json(nullptr));
    if (resp.contains("headers")) r.headers = resp.at("headers").get<std::vector<std::string>>();
    t.declared_responses[code] = std::move(r);
  }
  for (const auto& h : j.at("produces")) {
    t.produces.push_back({h.at("name").get<std::string>(), h.at("source").get<std::string>()});
  }
  t.consumes = j.value("consumes", std::vector<std::string>{});
  return t;
}

namespace {

const Json& deref_node(const Json& node, const ResolvedSpec& spec) {
  const Json* cur = &node;
  for (int hops = 0; hops < 16 && cur->is_object() && cur->contains("$ref"); ++hops) {
    auto it = spec.component_index.find(cur->at("$ref").get<std::string>());
    if (it == spec.component_index.end()) {
      throw Error(Errc::kDanglingRef, cur->at("$ref").get<std::string>());
    }
    cur = &it->second;
  }
  return *cur;
}

ParamSpec make_param(const Json& raw, const ResolvedSpec& spec) {
  const Json& p = deref_node(raw, spec);
  ParamSpec param;
  param.name = p.value("name", "");
  param.location = location_from(p.value("in", "query"));
  // OpenAPI: parameters default to optional; path parameters are always required.
  param.required = param.location == ParamLocation::kPath || p.value("required", false);
  if (p.contains("schema")) {
    param.schema = inline_all(p.at("schema"), spec);
  } else if (p.contains("content") && p.at("content").is_object()) {
    const auto media = pick_media_type(p.at("content"));
    param.json_content = media == "application/json";
    param.schema = inline_all(p.at("content").at(media).value("schema", Json::object()), spec);
  } else {
    param.schema = Json{{"type", "string"}};
  }
  if (p.contains("example") && param.schema.is_object() && !param.schema.contains("example")) {
    param.schema["example"] = p.at("example");
  }
  return param;
}

bool has_security(const Json& security) {
  if (!security.is_array()) return false;
  for (const auto& req : security) {
    if (req.is_object() && !req.empty()) return true;
  }
  return false;
}

std::vector<std::string> path_slots(const std::string& path) {
  static const std::regex kSlot(R"(\{([^}]+)\})");
  std::vector<std::string> slots;
  for (auto it = std::sregex_iterator(path.begin(), path.end(), kSlot);
       it != std::sregex_iterator(); ++it) {
    slots.push_back((*it)[1].str());
  }
  return slots;
}

}  // namespace

std::vector<RequestTemplate> compile(const ResolvedSpec& spec) {
  const auto& doc = spec.document;
  if (!doc.contains("paths") || !doc.at("paths").is_object() || doc.at("paths").empty()) {
    throw Error(Errc::kEmptySpec, spec.origin.string() + " has no paths");
  }

  std::string origin;
  std::string base_path;
  if (!spec.server_urls.empty()) {
    if (auto url = parse_url(spec.server_urls.front())) {
      origin = url->origin();
      base_path = url->path;
      while (!base_path.empty() && base_path.back() == '/') base_path.pop_back();
    }
  }
  const std::string service = api_name(spec);
  const std::string nf = nf_from_api_name(service).value_or(service);
  const bool global_security = doc.contains("security") && has_security(doc.at("security"));

  std::vector<RequestTemplate> templates;
  for (const auto& [path, raw_item] : doc.at("paths").items()) {
    const Json& item = deref_node(raw_item, spec);
    if (!item.is_object()) continue;
    for (const auto method : kHttpMethods) {
      if (!item.contains(method)) continue;
      const Json& op = item.at(std::string(method));

      RequestTemplate t;
      t.method = to_upper(method);
      t.path_template = base_path + path;
      t.template_id = t.method + " " + t.path_template;
      t.origin = origin;
      t.service = service;
      t.nf = nf;
      t.requires_auth = op.contains("security") ? has_security(op.at("security")) : global_security;

      // Operation-level parameters override path-level ones (same name + in).
      std::vector<ParamSpec> params;
      auto add = [&](const Json& list) {
        for (const auto& raw : list) {
          ParamSpec p = make_param(raw, spec);
          auto same = std::find_if(params.begin(), params.end(), [&](const ParamSpec& q) {
            return q.name == p.name && q.location == p.location;
          });
          if (same != params.end()) {
            *same = std::move(p);
          } else {
            params.push_back(std::move(p));
          }
        }
      };
      if (item.contains("parameters")) add(item.at("parameters"));
      if (op.contains("parameters")) add(op.at("parameters"));

      for (const auto& slot : path_slots(path)) {
        auto found = std::find_if(params.begin(), params.end(), [&](const ParamSpec& p) {
          return p.location == ParamLocation::kPath && p.name == slot;
        });
        if (found == params.end()) {
          ParamSpec p;
          p.name = slot;
          p.location = ParamLocation::kPath;
          p.required = true;
          p.schema = Json{{"type", "string"}};
          params.push_back(std::move(p));
        }
      }
      // Path params ordered by their slot position.
      const auto slots = path_slots(path);
      for (const auto& slot : slots) {
        for (auto& p : params) {
          if (p.location == ParamLocation::kPath && p.name == slot) {
            t.path_params.push_back(p);
            break;
          }
        }
      }
      for (auto& p : params) {
        if (p.location == ParamLocation::kQuery) t.query_params.push_back(std::move(p));
        else if (p.location == ParamLocation::kHeader) t.header_params.push_back(std::move(p));
      }

      if (op.contains("requestBody")) {
        const Json& body = deref_node(op.at("requestBody"), spec);
        t.body_required = body.value("required", false);
        if (body.contains("content") && body.at("content").is_object() &&
            !body.at("content").empty()) {
          t.body_media_type = pick_media_type(body.at("content"));
          t.body_schema =
              inline_all(body.at("content").at(t.body_media_type).value("schema", Json::object()), spec);
        }
      }

      if (op.contains("responses")) {
        for (const auto& [code, raw_resp] : op.at("responses").items()) {
          const Json& resp = deref_node(raw_resp, spec);
          ResponseSpec r;
          r.schema = nullptr;
          if (resp.contains("content") && resp.at("content").is_object() &&
              !resp.at("content").empty()) {
            const auto media = pick_media_type(resp.at("content"));
            r.schema = inline_all(resp.at("content").at(media).value("schema", Json::object()), spec);
          }
          if (resp.contains("headers") && resp.at("headers").is_object()) {
            for (const auto& [h, _] : resp.at("headers").items()) r.headers.push_back(h);
          }
          t.declared_responses[code] = std::move(r);
        }
      }

      for (const auto& [code, resp] : t.declared_responses) {
        if (code.empty() || code[0] != '2') continue;
        const Json eff = effective_schema(resp.schema);
        if (eff.is_object() && eff.contains("properties") && eff.at("properties").is_object()) {
          for (const auto& [field, _] : eff.at("properties").items()) {
            const bool seen = std::any_of(t.produces.begin(), t.produces.end(),
                                          [&](const HandleDescriptor& h) { return h.name == field; });
            if (!seen) t.produces.push_back({field, "body"});
          }
        }
        for (const auto& h : resp.headers) {
          if (to_lower(h) == "location") {
            const bool seen = std::any_of(t.produces.begin(), t.produces.end(),
                                          [](const HandleDescriptor& d) { return d.source == "location"; });
            if (!seen) t.produces.push_back({"Location", "location"});
          }
        }
      }
      templates.push_back(std::move(t));
    }
  }
  return templates;
}

// ---------------------------------------------------------------- dependencies

std::string normalize_handle(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (c == '-' || c == '_') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (std::string_view suffix : {"id", "ref"}) {
    if (out.size() > suffix.size() && out.ends_with(suffix)) {
      out.resize(out.size() - suffix.size());
      break;
    }
  }
  return out;
}

std::vector<DependencyEdge> DependencyGraph::edges_into(const std::string& consumer) const {
  std::vector<DependencyEdge> out;
  for (const auto& e : edges) {
    if (e.consumer == consumer) out.push_back(e);
  }
  return out;
}

DependencyGraph infer_dependencies(const std::vector<RequestTemplate>& templates) {
  DependencyGraph graph;
  for (const auto& t : templates) graph.nodes.push_back(t.template_id);
  std::sort(graph.nodes.begin(), graph.nodes.end());

  std::set<DependencyEdge> edges;
  for (const auto& producer : templates) {
    for (const auto& consumer : templates) {
      if (producer.template_id == consumer.template_id) continue;
      for (const auto& slot : consumer.path_params) {
        for (const auto& h : producer.produces) {
          bool match = false;
          if (h.source == "location") {
            match = consumer.path_template == producer.path_template + "/{" + slot.name + "}";
          } else {
            match = normalize_handle(h.name) == normalize_handle(slot.name);
          }
          // std::set keeps the first field seen for a (producer, consumer, slot).
          if (match) edges.insert({producer.template_id, consumer.template_id, slot.name, h.name});
        }
      }
    }
  }
  graph.edges.assign(edges.begin(), edges.end());
  return graph;
}

void apply_dependencies(std::vector<RequestTemplate>& templates, const DependencyGraph& graph) {
  for (auto& t : templates) {
    t.consumes.clear();
    for (const auto& e : graph.edges) {
      if (e.consumer == t.template_id &&
          std::find(t.consumes.begin(), t.consumes.end(), e.handle) == t.consumes.end()) {
        t.consumes.push_back(e.handle);
      }
    }
  }
}

// ---------------------------------------------------------------- dictionary

FuzzDictionary FuzzDictionary::defaults() {
  FuzzDictionary d;
  d.strings = {"", "A", std::string(1024, 'A'), "%s%n", "\xC3\xBCnic\xC3\xB8" "de-\xE6\xB8\xAC\xE8\xA9\xA6"};
  d.integers = {0, 1, -1, 2147483647};
  d.numbers = {0.0, 1.5, -1.0};
  d.booleans = {true, false};
  d.uuids = {"00000000-0000-0000-0000-000000000000", "3fa85f64-5717-4562-b3fc-2c963f66afa6"};
  d.uris = {"http://example.invalid/cb", "not a uri"};
  d.datetimes = {"1970-01-01T00:00:00Z", "9999-12-31T23:59:59Z", "garbage"};
  d.enum_outside = {"__OUT_OF_ENUM__"};
  return d;
}

std::vector<Json> FuzzDictionary::candidates(const std::string& name, const Json& schema,
                                             bool pinned) const {
  std::vector<Json> out;
  if (auto it = overlay.find(name); it != overlay.end()) {
    for (const auto& v : it->second) push_unique(out, v);
  }
  if (pinned && !out.empty()) return out;
  if (auto it = spec_values.find(name); it != spec_values.end()) {
    for (const auto& v : it->second) push_unique(out, v);
  }
  const Json eff = effective_schema(schema);
  if (eff.is_object() && eff.contains("example")) push_unique(out, eff.at("example"));
  if (eff.is_object() && eff.contains("enum") && eff.at("enum").is_array() &&
      !eff.at("enum").empty()) {
    for (const auto& v : eff.at("enum")) push_unique(out, v);
    for (const auto& v : enum_outside) push_unique(out, v);
    return out;
  }
  const std::string type = schema_type(eff);
  const std::string format = eff.is_object() ? eff.value("format", "") : "";
  if (type == "string" || type == "any") {
    const std::vector<std::string>* pool = &strings;
    if (format == "uuid") pool = &uuids;
    else if (format == "uri" || format == "uri-reference") pool = &uris;
    else if (format == "date-time") pool = &datetimes;
    for (const auto& v : *pool) push_unique(out, v);
  } else if (type == "integer" || type == "number") {
    if (type == "integer") {
      for (auto v : integers) push_unique(out, v);
    } else {
      for (auto v : numbers) push_unique(out, v);
    }
    // In-range values first, so first choices stay valid; the rest remain as probes.
    auto in_range = [&](const Json& v) {
      if (!v.is_number()) return true;
      const double x = v.get<double>();
      if (eff.contains("minimum") && x < eff.at("minimum").get<double>()) return false;
      if (eff.contains("maximum") && x > eff.at("maximum").get<double>()) return false;
      return true;
    };
    std::stable_partition(out.begin(), out.end(), in_range);
  } else if (type == "boolean") {
    for (bool v : booleans) push_unique(out, v);
  }
  return out;
}

Json FuzzDictionary::to_json() const {
  Json j;
  j["strings"] = strings;
  j["integers"] = integers;
  j["numbers"] = numbers;
  j["booleans"] = booleans;
  j["uuids"] = uuids;
  j["uris"] = uris;
  j["datetimes"] = datetimes;
  j["enum_outside"] = enum_outside;
  j["spec_values"] = Json::object();
  for (const auto& [k, v] : spec_values) j["spec_values"][k] = v;
  j["overlay"] = Json::object();
  for (const auto& [k, v] : overlay) j["overlay"][k] = v;
  return j;
}

FuzzDictionary FuzzDictionary::from_json(const Json& j) {
  FuzzDictionary d;
  d.strings = j.at("strings").get<std::vector<std::string>>();
  d.integers = j.at("integers").get<std::vector<std::int64_t>>();
  d.numbers = j.at("numbers").get<std::vector<double>>();
  d.booleans = j.at("booleans").get<std::vector<bool>>();
  d.uuids = j.at("uuids").get<std::vector<std::string>>();
  d.uris = j.at("uris").get<std::vector<std::string>>();
  d.datetimes = j.at("datetimes").get<std::vector<std::string>>();
  d.enum_outside = j.at("enum_outside").get<std::vector<std::string>>();
  for (const auto& [k, v] : j.at("spec_values").items()) {
    d.spec_values[k] = std::vector<Json>(v.begin(), v.end());
  }
  for (const auto& [k, v] : j.at("overlay").items()) {
    d.overlay[k] = std::vector<Json>(v.begin(), v.end());
  }
  return d;
}

namespace {

void harvest(const std::string& name, const Json& schema, FuzzDictionary& dict, int depth) {
  if (depth > 8) return;
  const Json eff = effective_schema(schema);
  if (!eff.is_object()) return;
  if (!name.empty()) {
    const bool has_enum = eff.contains("enum") && eff.at("enum").is_array() && !eff.at("enum").empty();
    if (eff.contains("example") || has_enum) {
      auto& values = dict.spec_values[name];
      if (eff.contains("example")) push_unique(values, eff.at("example"));
      if (has_enum) {
        for (const auto& v : eff.at("enum")) push_unique(values, v);
        for (const auto& v : dict.enum_outside) push_unique(values, v);
      }
    }
  }
  if (eff.contains("properties") && eff.at("properties").is_object()) {
    for (const auto& [prop, sub] : eff.at("properties").items()) harvest(prop, sub, dict, depth + 1);
  }
  if (eff.contains("items")) harvest(name, eff.at("items"), dict, depth + 1);
}

const Json* schema_for_name(const std::vector<RequestTemplate>& templates, const std::string& name) {
  for (const auto& t : templates) {
    if (const auto* p = t.find_param(name)) return &p->schema;
  }
  return nullptr;
}

}  // namespace

FuzzDictionary build_dictionary(const std::vector<RequestTemplate>& templates,
                                const std::map<std::string, std::vector<Json>>& overlay) {
  FuzzDictionary dict = FuzzDictionary::defaults();
  for (const auto& t : templates) {
    for (const auto* p : t.all_params()) harvest(p->name, p->schema, dict, 0);
    if (t.body_schema) harvest("", *t.body_schema, dict, 0);
  }
  for (const auto& [name, values] : overlay) {
    if (const Json* schema = schema_for_name(templates, name)) {
      for (const auto& v : values) {
        if (!value_matches(v, *schema)) {
          throw Error(Errc::kOverlayTypeMismatch,
                      "overlay value " + v.dump() + " for `" + name + "` is not " +
                          schema_type(*schema));
        }
      }
    }
    dict.overlay[name] = values;
  }
  return dict;
}

// ---------------------------------------------------------------- pinning

namespace {

bool body_has_field(const Json& schema, const std::string& name, int depth) {
  if (depth > 8) return false;
  const Json eff = effective_schema(schema);
  if (!eff.is_object()) return false;
  if (eff.contains("properties") && eff.at("properties").is_object()) {
    for (const auto& [prop, sub] : eff.at("properties").items()) {
      if (prop == name || body_has_field(sub, name, depth + 1)) return true;
    }
  }
  if (eff.contains("items")) return body_has_field(eff.at("items"), name, depth + 1);
  return false;
}

}  // namespace

RequestTemplate annotate_fuzzable(const RequestTemplate& tmpl, const PinPolicy& policy,
                                  std::vector<Diagnostic>* warnings) {
  RequestTemplate out = tmpl;
  for (auto& p : out.header_params) {
    const auto lower = to_lower(p.name);
    if ((policy.pin_authorization && lower == "authorization") || lower == "content-type") {
      p.fuzzable = false;
    }
  }
  for (const auto& [name, literal] : policy.names) {
    bool matched = false;
    for (auto* group : {&out.path_params, &out.query_params, &out.header_params}) {
      for (auto& p : *group) {
        if (p.name != name) continue;
        p.fuzzable = false;
        if (literal) p.pinned_value = *literal;
        matched = true;
      }
    }
    if (out.body_schema && body_has_field(*out.body_schema, name, 0)) {
      out.pinned_fields.insert(name);
      matched = true;
    }
    if (!matched && warnings) {
      warnings->push_back({"unknown-pin", tmpl.template_id,
                           "pin policy names `" + name + "`, which this operation does not have"});
    }
  }
  return out;
}

// ---------------------------------------------------------------- grammar

const RequestTemplate* Grammar::find(const std::string& template_id) const {
  for (const auto& t : templates) {
    if (t.template_id == template_id) return &t;
  }
  return nullptr;
}

Json Grammar::to_json() const {
  Json j;
  j["templates"] = Json::array();
  for (const auto& t : templates) j["templates"].push_back(t.to_json());
  j["edges"] = Json::array();
  for (const auto& e : graph.edges) {
    j["edges"].push_back({{"producer", e.producer}, {"consumer", e.consumer},
                          {"handle", e.handle}, {"field", e.field}});
  }
  j["dictionary"] = dictionary.to_json();
  j["meta"] = {{"seed_spec_hash", seed_spec_hash}, {"format", "sbifuzz-grammar/1"}};
  return j;
}

Grammar Grammar::from_json(const Json& j) {
  Grammar g;
  for (const auto& t : j.at("templates")) g.templates.push_back(RequestTemplate::from_json(t));
  for (const auto& t : g.templates) g.graph.nodes.push_back(t.template_id);
  std::sort(g.graph.nodes.begin(), g.graph.nodes.end());
  for (const auto& e : j.at("edges")) {
    g.graph.edges.push_back({e.at("producer").get<std::string>(), e.at("consumer").get<std::string>(),
                             e.at("handle").get<std::string>(), e.value("field", "")});
  }
  g.dictionary = FuzzDictionary::from_json(j.at("dictionary"));
  g.seed_spec_hash = j.at("meta").value("seed_spec_hash", "");
  return g;
}

Grammar Grammar::load(const std::filesystem::path& path) {
  try {
    return from_json(Json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParseError, path.string() + ": " + e.what());
  }
}

void Grammar::save(const std::filesystem::path& path) const {
  write_file(path, to_json().dump(2) + "\n");
}

Grammar compile_grammar(const std::vector<ResolvedSpec>& specs,
                        const std::map<std::string, std::vector<Json>>& overlay,
                        const PinPolicy& policy, std::vector<Diagnostic>* warnings) {
  Grammar g;
  std::string hash_input;
  for (const auto& spec : specs) {
    auto templates = compile(spec);
    for (auto& t : templates) g.templates.push_back(annotate_fuzzable(t, policy, nullptr));
    hash_input += canonical_dump(spec.document);
    hash_input.push_back('\n');
  }
  if (warnings) {
    for (const auto& [name, _] : policy.names) {
      const bool any = std::any_of(g.templates.begin(), g.templates.end(), [&](const RequestTemplate& t) {
        return t.find_param(name) != nullptr || t.pinned_fields.count(name) > 0;
      });
      if (!any) warnings->push_back({"unknown-pin", "grammar", "no operation has `" + name + "`"});
    }
  }
  g.graph = infer_dependencies(g.templates);
  apply_dependencies(g.templates, g.graph);
  g.dictionary = build_dictionary(g.templates, overlay);
  g.seed_spec_hash = sha256_hex(hash_input);
  return g;
}

}  // namespace sbifuzz
