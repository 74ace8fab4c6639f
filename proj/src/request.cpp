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

#include "sbifuzz/request.hpp"

#include <algorithm>

#include "sbifuzz/error.hpp"

namespace sbifuzz {

ChoiceSource ChoiceSource::recording(std::uint64_t seed) { return ChoiceSource(Mode::kRecord, seed); }

ChoiceSource ChoiceSource::replaying(std::vector<std::uint32_t> tape) {
  ChoiceSource c(Mode::kReplay, 0);
  c.tape_ = std::move(tape);
  return c;
}

ChoiceSource ChoiceSource::canonical() { return ChoiceSource(Mode::kCanonical, 0); }

std::uint32_t ChoiceSource::pick(std::uint32_t n) {
  if (n == 0) n = 1;
  std::uint32_t v = 0;
  switch (mode_) {
    case Mode::kRecord:
      v = static_cast<std::uint32_t>(rng_() % n);
      break;
    case Mode::kCanonical:
      v = 0;
      break;
    case Mode::kReplay:
      v = cursor_ < tape_.size() ? tape_[cursor_++] % n : 0;
      return v;
  }
  tape_.push_back(v);
  return v;
}

bool ChoiceSource::coin(double p) {
  std::uint32_t v = 1;
  switch (mode_) {
    case Mode::kRecord:
      v = (static_cast<double>(rng_() >> 11) * 0x1.0p-53) < p ? 1 : 0;
      break;
    case Mode::kCanonical:
      v = 1;
      break;
    case Mode::kReplay:
      return cursor_ < tape_.size() ? tape_[cursor_++] != 0 : true;
  }
  tape_.push_back(v);
  return v != 0;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  h = mix(h ^ a);
  h = mix(h ^ b);
  h = mix(h ^ c);
  return h;
}

std::string render_scalar(const Json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

std::string serialize_body(const Json& body, const std::string& media_type) {
  if (media_type == "application/x-www-form-urlencoded" && body.is_object()) {
    std::vector<std::pair<std::string, std::string>> fields;
    for (const auto& [k, v] : body.items()) fields.emplace_back(k, render_scalar(v));
    return form_encode(fields);
  }
  return body.dump();
}

std::string RequestParts::path() const {
  std::string out = path_template;
  for (const auto& [slot, value] : path_values) {
    const std::string marker = "{" + slot + "}";
    const auto pos = out.find(marker);
    if (pos != std::string::npos) out.replace(pos, marker.size(), percent_encode(value));
  }
  return out;
}

std::string RequestParts::url() const {
  std::string out = origin + path();
  for (std::size_t i = 0; i < query.size(); ++i) {
    out += i == 0 ? "?" : "&";
    out += percent_encode(query[i].first) + "=" + percent_encode(query[i].second);
  }
  return out;
}

std::string RequestParts::body_text() const {
  if (raw_body) return *raw_body;
  if (body) return serialize_body(*body, media_type);
  return "";
}

void RequestParts::set_path_value(const std::string& slot, const std::string& value) {
  for (auto& [k, v] : path_values) {
    if (k == slot) {
      v = value;
      return;
    }
  }
  path_values.emplace_back(slot, value);
}

Json RequestParts::to_json() const {
  auto pairs = [](const auto& list) {
    Json out = Json::array();
    for (const auto& [k, v] : list) out.push_back(Json::array({k, v}));
    return out;
  };
  Json j{{"template_id", template_id},
         {"method", method},
         {"origin", origin},
         {"path_template", path_template},
         {"path_values", pairs(path_values)},
         {"query", pairs(query)},
         {"headers", pairs(headers)},
         {"media_type", media_type},
         {"bindings", bindings}};
  j["body"] = body ? *body : Json(nullptr);
  j["raw_body"] = raw_body ? Json(*raw_body) : Json(nullptr);
  return j;
}

RequestParts RequestParts::from_json(const Json& j) {
  auto pairs = [](const Json& list) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& kv : list) out.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    return out;
  };
  RequestParts p;
  p.template_id = j.value("template_id", "");
  p.method = j.at("method").get<std::string>();
  p.origin = j.at("origin").get<std::string>();
  p.path_template = j.at("path_template").get<std::string>();
  p.path_values = pairs(j.at("path_values"));
  p.query = pairs(j.at("query"));
  p.headers = pairs(j.at("headers"));
  p.media_type = j.value("media_type", "");
  if (j.contains("bindings")) p.bindings = j.at("bindings").get<std::map<std::string, std::string>>();
  if (j.contains("body") && !j.at("body").is_null()) p.body = j.at("body");
  if (j.contains("raw_body") && j.at("raw_body").is_string()) p.raw_body = j.at("raw_body").get<std::string>();
  return p;
}

namespace {

bool is_container(const Json& v) { return v.is_array() || v.is_object(); }

Json fallback_for(const std::string& type) {
  if (type == "integer") return 0;
  if (type == "number") return 0.0;
  if (type == "boolean") return true;
  return "A";
}

class Generator {
 public:
  Generator(const RequestTemplate& tmpl, const FuzzDictionary& dict, ChoiceSource& choices,
            const InstantiateOptions& options)
      : tmpl_(tmpl), dict_(dict), choices_(choices), options_(options) {}

  Json value(const std::string& name, const Json& schema, int depth, bool pinned) {
    const Json eff = effective_schema(schema);
    const std::string type = schema_type(eff);
    if (type == "object") {
      Json out = Json::object();
      if (depth > options_.max_depth || !eff.contains("properties")) return out;
      std::set<std::string> required;
      if (eff.contains("required")) {
        for (const auto& r : eff.at("required")) required.insert(r.get<std::string>());
      }
      for (const auto& [key, sub] : eff.at("properties").items()) {
        const Json sub_eff = effective_schema(sub);
        if (sub_eff.is_object() && sub_eff.value("readOnly", false)) continue;
        if (!required.count(key) && !choices_.coin(options_.optional_presence)) continue;
        const bool pin = depth == 0 && tmpl_.pinned_fields.count(key) > 0;
        out[key] = value(key, sub, depth + 1, pin);
      }
      return out;
    }
    if (type == "array") {
      std::vector<Json> cands;
      for (auto& c : dict_.candidates(name, eff, pinned)) {
        if (c.is_array()) cands.push_back(std::move(c));
      }
      const auto i = choices_.pick(static_cast<std::uint32_t>(cands.size() + 1));
      if (i < cands.size()) return cands[i];
      Json items = eff.contains("items") ? eff.at("items") : Json::object();
      if (depth > options_.max_depth) return Json::array();
      return Json::array({value(name, items, depth + 1, pinned)});
    }
    std::vector<Json> cands;
    for (auto& c : dict_.candidates(name, eff, pinned)) {
      if (!is_container(c)) cands.push_back(std::move(c));
    }
    if (cands.empty()) return fallback_for(type);
    return cands[choices_.pick(static_cast<std::uint32_t>(cands.size()))];
  }

  std::string param(const ParamSpec& p) {
    if (p.pinned_value) return render_scalar(*p.pinned_value);
    Json v = value(p.name, p.schema, 0, !p.fuzzable);
    if (p.json_content) return v.dump();
    if (v.is_array()) {
      std::string out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += render_scalar(v[i]);
      }
      return out;
    }
    return render_scalar(v);
  }

 private:
  const RequestTemplate& tmpl_;
  const FuzzDictionary& dict_;
  ChoiceSource& choices_;
  const InstantiateOptions& options_;
};

bool managed_header(const std::string& name) {
  const auto n = to_lower(name);
  return n == "authorization" || n == "content-type";
}

}  // namespace

RequestParts instantiate_parts(const RequestTemplate& tmpl, const FuzzDictionary& dict,
                               const std::map<std::string, std::string>& bindings,
                               ChoiceSource& choices, const InstantiateOptions& options) {
  Generator gen(tmpl, dict, choices, options);
  RequestParts parts;
  parts.template_id = tmpl.template_id;
  parts.method = tmpl.method;
  parts.origin = tmpl.origin;
  parts.path_template = tmpl.path_template;
  parts.media_type = tmpl.body_media_type;

  for (const auto& p : tmpl.path_params) {
    if (auto it = bindings.find(p.name); it != bindings.end()) {
      parts.path_values.emplace_back(p.name, it->second);
      parts.bindings[p.name] = it->second;
      continue;
    }
    if (std::find(tmpl.consumes.begin(), tmpl.consumes.end(), p.name) != tmpl.consumes.end()) {
      throw Error(Errc::kMissingBinding, tmpl.template_id + ": no value for {" + p.name + "}");
    }
    parts.path_values.emplace_back(p.name, gen.param(p));
  }
  for (const auto& p : tmpl.query_params) {
    if (!p.required && !choices.coin(options.optional_presence)) continue;
    parts.query.emplace_back(p.name, gen.param(p));
  }
  for (const auto& p : tmpl.header_params) {
    if (managed_header(p.name)) continue;
    if (!p.required && !p.pinned_value && !choices.coin(options.optional_presence)) continue;
    parts.headers.emplace_back(p.name, gen.param(p));
  }
  if (tmpl.body_schema && (tmpl.body_required || choices.coin(options.optional_presence))) {
    parts.body = gen.value("", *tmpl.body_schema, 0, false);
  }
  return parts;
}

ConcreteRequest assemble(const RequestParts& parts, Provenance provenance) {
  ConcreteRequest r;
  r.method = parts.method;
  r.url = parts.url();
  r.headers = parts.headers;
  if (parts.body || parts.raw_body) {
    set_header(r.headers, "Content-Type",
               parts.media_type.empty() ? "application/json" : parts.media_type);
    r.body = parts.body_text();
  }
  provenance.bindings = parts.bindings;
  r.provenance = std::move(provenance);
  return r;
}

ConcreteRequest instantiate(const RequestTemplate& tmpl, const FuzzDictionary& dict,
                            const std::map<std::string, std::string>& bindings,
                            ChoiceSource& choices, const InstantiateOptions& options) {
  auto parts = instantiate_parts(tmpl, dict, bindings, choices, options);
  Provenance p;
  p.template_id = tmpl.template_id;
  p.mutation = "explore";
  p.choices = choices.tape();
  p.rng_seed = choices.seed();
  return assemble(parts, std::move(p));
}

Json ExecutedExchange::to_json() const {
  Json h = Json::array();
  for (const auto& [k, v] : response_headers) h.push_back(Json::array({k, v}));
  Json j{{"sequence", sequence_index},
         {"rendering", rendering},
         {"step", step},
         {"request", request.to_json()},
         {"status", status},
         {"response_headers", h},
         {"response_body", response_body}};
  j["transport_error"] = transport_error ? Json(*transport_error) : Json(nullptr);
  j["token_claims"] = token_claims ? token_claims->to_json() : Json(nullptr);
  return j;
}

ExecutedExchange ExecutedExchange::from_json(const Json& j) {
  ExecutedExchange e;
  e.sequence_index = j.value("sequence", std::uint64_t{0});
  e.rendering = j.value("rendering", 0);
  e.step = j.value("step", 0);
  e.request = ConcreteRequest::from_json(j.at("request"));
  e.status = j.value("status", 0);
  if (j.contains("response_headers")) {
    for (const auto& kv : j.at("response_headers")) {
      e.response_headers.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    }
  }
  e.response_body = j.value("response_body", "");
  if (j.contains("transport_error") && j.at("transport_error").is_string()) {
    e.transport_error = j.at("transport_error").get<std::string>();
  }
  if (j.contains("token_claims") && j.at("token_claims").is_object()) {
    e.token_claims = AccessTokenClaims::from_json(j.at("token_claims"));
  }
  return e;
}

ExecutedExchange make_exchange(const ConcreteRequest& request, const HttpResponse& response,
                               const std::optional<SignedToken>& token) {
  ExecutedExchange e;
  e.request = request;
  e.status = response.status;
  e.response_headers = response.headers;
  e.response_body = response.body;
  e.latency_ms = response.latency_ms;
  e.transport_error = response.transport_error;
  if (token && !token->claims.subject.empty()) e.token_claims = token->claims;
  return e;
}

std::optional<std::string> extract_handle(const ExecutedExchange& exchange, const std::string& field) {
  if (!exchange.success()) return std::nullopt;
  if (field == "Location") {
    auto loc = find_header(exchange.response_headers, "Location");
    if (!loc) return std::nullopt;
    std::string path = loc->substr(0, loc->find('?'));
    while (!path.empty() && path.back() == '/') path.pop_back();
    const auto slash = path.rfind('/');
    if (slash == std::string::npos || slash + 1 >= path.size()) return std::nullopt;
    return path.substr(slash + 1);
  }
  auto body = Json::parse(exchange.response_body, nullptr, false);
  if (body.is_discarded() || !body.is_object() || !body.contains(field)) return std::nullopt;
  const auto& v = body.at(field);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  return std::nullopt;
}

}  // namespace sbifuzz
