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

#include "sbifuzz/checkers.hpp"

#include <algorithm>
#include <set>

#include "sbifuzz/error.hpp"

namespace sbifuzz {

Json CheckerFinding::to_json() const {
  Json j{{"checker", checker_name},
         {"kind", kind},
         {"expectation", expectation},
         {"observed", observed.to_json()}};
  j["base_exchange"] = base_exchange ? base_exchange->to_json() : Json(nullptr);
  return j;
}

CheckerFinding CheckerFinding::from_json(const Json& j) {
  CheckerFinding f;
  f.checker_name = j.at("checker").get<std::string>();
  f.kind = j.value("kind", "");
  f.expectation = j.value("expectation", "");
  f.observed = ExecutedExchange::from_json(j.at("observed"));
  if (j.contains("base_exchange") && j.at("base_exchange").is_object()) {
    f.base_exchange = ExecutedExchange::from_json(j.at("base_exchange"));
  }
  return f;
}

namespace {

using Members = std::vector<std::pair<std::string, Json>>;

std::string serialize_members(const Members& members, const std::string& media_type) {
  if (media_type == "application/x-www-form-urlencoded") {
    std::vector<std::pair<std::string, std::string>> fields;
    for (const auto& [k, v] : members) fields.emplace_back(k, render_scalar(v));
    return form_encode(fields);
  }
  std::string out = "{";
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i) out += ",";
    out += Json(members[i].first).dump() + ":" + members[i].second.dump();
  }
  return out + "}";
}

std::string kind_of(const Json& v) {
  if (v.is_string()) return "string";
  if (v.is_number()) return "number";
  if (v.is_boolean()) return "boolean";
  if (v.is_null()) return "null";
  if (v.is_array()) return "array";
  return "object";
}

Json flipped(const Json& original, const std::string& kind) {
  if (kind == "string") return "fuzz";
  if (kind == "number") return 42;
  if (kind == "boolean") return true;
  if (kind == "null") return nullptr;
  return Json::array({original});
}

struct Leaf {
  std::vector<std::string> path;
  Json value;
};

void collect_leaves(const Json& node, std::vector<std::string>& path, int depth,
                    std::vector<Leaf>& out) {
  for (const auto& [k, v] : node.items()) {
    path.push_back(k);
    if (v.is_object() && !v.empty() && depth < 2) {
      collect_leaves(v, path, depth + 1, out);
    } else {
      out.push_back({path, v});
    }
    path.pop_back();
  }
}

Json::json_pointer pointer_for(const std::vector<std::string>& path) {
  Json::json_pointer p;
  for (const auto& k : path) p /= k;
  return p;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

bool has_structured_format(const ParamSpec& p) {
  if (p.json_content) return true;
  const Json eff = effective_schema(p.schema);
  if (!eff.is_object() || schema_type(eff) != "string") return false;
  const auto fmt = eff.value("format", "");
  return fmt == "uuid" || fmt == "date-time" || fmt == "uri" || fmt == "uri-reference";
}

std::string format_name(const ParamSpec& p) {
  if (p.json_content) return "json";
  return effective_schema(p.schema).value("format", "string");
}

bool replace_value(RequestParts& parts, const ParamSpec& p, const std::string& value) {
  auto swap_in = [&](auto& list) {
    for (auto& [k, v] : list) {
      if (k == p.name) {
        v = value;
        return true;
      }
    }
    return false;
  };
  switch (p.location) {
    case ParamLocation::kPath: return swap_in(parts.path_values);
    case ParamLocation::kQuery: return swap_in(parts.query);
    case ParamLocation::kHeader: return swap_in(parts.headers);
  }
  return false;
}

std::optional<std::string> current_value(const RequestParts& parts, const ParamSpec& p) {
  const std::vector<std::pair<std::string, std::string>>* list = nullptr;
  switch (p.location) {
    case ParamLocation::kPath: list = &parts.path_values; break;
    case ParamLocation::kQuery: list = &parts.query; break;
    case ParamLocation::kHeader: list = &parts.headers; break;
  }
  for (const auto& [k, v] : *list) {
    if (k == p.name) return v;
  }
  return std::nullopt;
}

}  // namespace

RequestParts canonical_parts(const RequestTemplate& tmpl, const FuzzDictionary& dict,
                             const std::map<std::string, std::string>& bindings) {
  auto choices = ChoiceSource::canonical();
  return instantiate_parts(tmpl, dict, bindings, choices);
}

std::vector<CheckerVariant> payload_body_checker(const RequestParts& valid, const Json& schema,
                                                 std::size_t cap, const std::set<std::string>& pinned) {
  (void)schema;  // the valid body already conforms; mutations work on its shape
  std::vector<CheckerVariant> out;
  if (!valid.body || !valid.body->is_object()) return out;
  const Json& body = *valid.body;
  const std::string tag(kPayloadBody);
  auto full = [&] { return cap != 0 && out.size() >= cap; };
  auto emit_raw = [&](std::string raw, std::string detail) {
    if (full()) return;
    RequestParts p = valid;
    p.raw_body = std::move(raw);
    out.push_back({std::move(p), tag + ":" + detail});
  };
  auto emit_body = [&](Json b, std::string detail) {
    if (full()) return;
    RequestParts p = valid;
    p.body = std::move(b);
    p.raw_body.reset();
    out.push_back({std::move(p), tag + ":" + detail});
  };

  Members members;
  for (const auto& [k, v] : body.items()) members.emplace_back(k, v);

  for (const auto& [k, v] : members) {
    if (pinned.count(k)) continue;
    Json b = body;
    b.erase(k);
    emit_body(std::move(b), "drop:" + k);
  }
  for (const auto& m : members) {
    if (pinned.count(m.first)) continue;
    Members dup = members;
    dup.push_back(m);
    emit_raw(serialize_members(dup, valid.media_type), "duplicate:" + m.first);
  }
  if (members.size() >= 2) {
    Members rev(members.rbegin(), members.rend());
    emit_raw(serialize_members(rev, valid.media_type), "reorder");
  }
  std::vector<Leaf> leaves;
  std::vector<std::string> path;
  collect_leaves(body, path, 1, leaves);
  for (const auto& leaf : leaves) {
    if (pinned.count(leaf.path.front()) || pinned.count(leaf.path.back())) continue;
    const auto own = kind_of(leaf.value);
    for (const char* kind : {"string", "number", "boolean", "null", "array"}) {
      if (own == kind) continue;
      Json b = body;
      b[pointer_for(leaf.path)] = flipped(leaf.value, kind);
      emit_body(std::move(b), "flip:" + join(leaf.path, '.') + ":" + kind);
    }
  }
  return out;
}

std::vector<CheckerVariant> optional_param_omission_checker(
    const RequestTemplate& tmpl, const FuzzDictionary& dict,
    const std::map<std::string, std::string>& bindings) {
  std::vector<CheckerVariant> out;
  const RequestParts base = canonical_parts(tmpl, dict, bindings);
  auto omit = [&](const ParamSpec& p, auto member) {
    RequestParts v = base;
    auto& list = v.*member;
    std::erase_if(list, [&](const auto& kv) { return kv.first == p.name; });
    out.push_back({std::move(v), std::string(kOptionalOmission) + ":" + p.name});
  };
  for (const auto& p : tmpl.query_params) {
    if (!p.required && p.fuzzable) omit(p, &RequestParts::query);
  }
  for (const auto& p : tmpl.header_params) {
    if (!p.required && !p.pinned_value && p.fuzzable) omit(p, &RequestParts::headers);
  }
  return out;
}

std::vector<CheckerVariant> malformed_value_checker(
    const RequestTemplate& tmpl, const FuzzDictionary& dict,
    const std::map<std::string, std::string>& bindings, std::size_t cap) {
  std::vector<CheckerVariant> out;
  const RequestParts base = canonical_parts(tmpl, dict, bindings);
  for (const auto* p : tmpl.all_params()) {
    if (!p->fuzzable || !has_structured_format(*p) || bindings.count(p->name)) continue;
    const auto value = current_value(base, *p);
    if (!value) continue;
    const bool json = p->json_content;

    std::vector<std::pair<std::string, std::string>> patterns;
    const auto colon = value->find(':');
    patterns.emplace_back("truncated", json && colon != std::string::npos
                                           ? value->substr(0, colon + 1)
                                           : value->substr(0, value->size() / 2));
    patterns.emplace_back("wrong-type", json ? "42" : "not-a-" + format_name(*p));
    if (json) {
      auto parsed = Json::parse(*value, nullptr, false);
      if (!parsed.is_discarded() && parsed.is_object()) {
        parsed["overlong"] = std::string(4096, 'A');
        patterns.emplace_back("over-long", parsed.dump());
      } else {
        patterns.emplace_back("over-long", Json(std::string(4096, 'A')).dump());
      }
    } else {
      patterns.emplace_back("over-long", *value + std::string(4096, 'A'));
    }
    patterns.emplace_back("invalid-chars", *value + "\"<>{}|\\^\x01");

    for (auto& [name, bad] : patterns) {
      if (cap != 0 && out.size() >= cap) return out;
      RequestParts v = base;
      replace_value(v, *p, bad);
      out.push_back({std::move(v), std::string(kMalformedValue) + ":" + p->name + ":" + name});
    }
  }
  return out;
}

std::vector<CrossServiceProbe> cross_service_probes(const Grammar& grammar) {
  std::map<std::string, std::string> services;  // service -> nf
  for (const auto& t : grammar.templates) {
    if (t.requires_auth && !t.service.empty()) services.emplace(t.service, t.nf);
  }
  std::vector<CrossServiceProbe> out;
  if (services.size() < 2) return out;

  std::map<std::string, const RequestTemplate*> first_get;
  for (const auto& t : grammar.templates) {
    if (t.method != "GET" || !t.requires_auth || !t.consumes.empty()) continue;
    auto& slot = first_get[t.service];
    if (!slot || t.template_id < slot->template_id) slot = &t;
  }
  for (const auto& [a, a_nf] : services) {
    for (const auto& [b, b_nf] : services) {
      if (a == b || !first_get.count(b)) continue;
      CrossServiceProbe probe;
      probe.token_service = a;
      probe.token_nf = a_nf;
      probe.target = first_get.at(b);
      probe.parts = canonical_parts(*probe.target, grammar.dictionary);
      out.push_back(std::move(probe));
    }
  }
  return out;
}

std::optional<CheckerFinding> judge_cross_service(const CrossServiceProbe& probe,
                                                  const ExecutedExchange& observed) {
  if (!observed.success()) return std::nullopt;
  const auto scopes = split(probe.token_service, ' ');
  if (std::find(scopes.begin(), scopes.end(), probe.target->service) != scopes.end()) {
    return std::nullopt;
  }
  CheckerFinding f;
  f.checker_name = std::string(kCrossServiceToken);
  f.kind = "scope-bypass";
  f.expectation = "token scoped to " + probe.token_service + " must be refused by " +
                  probe.target->service + " (403)";
  f.observed = observed;
  return f;
}

std::vector<CheckerFinding> cross_service_token_checker(const Grammar& grammar,
                                                        const TokenForService& token_for,
                                                        Transport& transport,
                                                        std::vector<std::string>* skipped) {
  std::vector<CheckerFinding> out;
  for (const auto& probe : cross_service_probes(grammar)) {
    SignedToken token;
    try {
      token = token_for(probe.token_service, probe.token_nf);
    } catch (const Error& e) {
      if (skipped) skipped->push_back(probe.token_service + " -> " + probe.target->service + ": " + e.what());
      continue;
    }
    Provenance prov;
    prov.template_id = probe.target->template_id;
    prov.mutation = std::string(kCrossServiceToken) + ":" + probe.token_service;
    auto request = attach_token(assemble(probe.parts, prov), token);
    auto exchange = make_exchange(request, transport.send(request), token);
    if (auto f = judge_cross_service(probe, exchange)) out.push_back(std::move(*f));
  }
  return out;
}

std::optional<CheckerFinding> status_mapping_checker(const ExecutedExchange& exchange,
                                                     const RequestTemplate& tmpl) {
  if (exchange.failed()) return std::nullopt;
  const int status = exchange.status;
  CheckerFinding f;
  f.checker_name = std::string(kStatusMapping);
  f.observed = exchange;
  if (!tmpl.declares(status) && !tmpl.declares_default()) {
    f.kind = "undeclared-status";
    f.expectation = "status " + std::to_string(status) + " is not declared for " + tmpl.template_id;
    return f;
  }
  if (status == 500 && tmpl.declares(404)) {
    const auto& bound = exchange.request.provenance.bindings;
    const bool dictionary_slot = std::any_of(tmpl.path_params.begin(), tmpl.path_params.end(),
                                             [&](const ParamSpec& p) { return !bound.count(p.name); });
    if (dictionary_slot) {
      f.kind = "status-mapping";
      f.expectation = "an unknown resource id must map to the declared 404, not 500";
      return f;
    }
  }
  return std::nullopt;
}

}  // namespace sbifuzz
