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

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sbifuzz/grammar.hpp"
#include "sbifuzz/request.hpp"

namespace sbifuzz {

inline constexpr std::string_view kPayloadBody = "payload_body";
inline constexpr std::string_view kOptionalOmission = "optional_omission";
inline constexpr std::string_view kMalformedValue = "malformed_value";
inline constexpr std::string_view kCrossServiceToken = "cross_service_token";
inline constexpr std::string_view kStatusMapping = "status_mapping";

struct CheckerVariant {
  RequestParts parts;
  std::string mutation;  // "<checker>:<detail>"
};

struct CheckerFinding {
  std::string checker_name;
  std::string kind;  // "scope-bypass" | "undeclared-status" | "status-mapping"
  std::string expectation;
  ExecutedExchange observed;
  std::optional<ExecutedExchange> base_exchange;

  Json to_json() const;
  static CheckerFinding from_json(const Json& j);
};

// Body mutations of a valid request: one drop and one duplicated key per
// top-level member, one member-order permutation, and type flips of every
// leaf down to depth 2. `cap` of 0 means no limit. Members named in
// `pinned` are left alone.
std::vector<CheckerVariant> payload_body_checker(const RequestParts& valid, const Json& schema,
                                                 std::size_t cap = 0,
                                                 const std::set<std::string>& pinned = {});

// One variant per optional query/header parameter, each lacking just that
// parameter; everything else takes the first stable dictionary choice.
std::vector<CheckerVariant> optional_param_omission_checker(
    const RequestTemplate& tmpl, const FuzzDictionary& dict,
    const std::map<std::string, std::string>& bindings = {});

// For parameters carrying JSON content or a uuid/date-time/uri format:
// truncated, wrong-type, over-long and invalid-character values.
std::vector<CheckerVariant> malformed_value_checker(
    const RequestTemplate& tmpl, const FuzzDictionary& dict,
    const std::map<std::string, std::string>& bindings = {}, std::size_t cap = 0);

// The canonical base every checker mutates.
RequestParts canonical_parts(const RequestTemplate& tmpl, const FuzzDictionary& dict,
                             const std::map<std::string, std::string>& bindings = {});

struct CrossServiceProbe {
  std::string token_service;  // scope of the token presented
  std::string token_nf;       // NF that token was requested for
  const RequestTemplate* target = nullptr;
  RequestParts parts;
};

// Every ordered pair (A, B) of authorized services with A != B, probing the
// first dependency-free GET of B. Empty for grammars with one service.
std::vector<CrossServiceProbe> cross_service_probes(const Grammar& grammar);

// A probe answered 2xx means the producer accepted a token whose scope does
// not cover it.
std::optional<CheckerFinding> judge_cross_service(const CrossServiceProbe& probe,
                                                  const ExecutedExchange& observed);

using TokenForService = std::function<SignedToken(const std::string& service, const std::string& nf)>;

// Runs every probe through `transport`. Pairs whose token cannot be obtained
// are skipped and noted in `skipped`.
std::vector<CheckerFinding> cross_service_token_checker(const Grammar& grammar,
                                                        const TokenForService& token_for,
                                                        Transport& transport,
                                                        std::vector<std::string>* skipped = nullptr);

// Undeclared status (`default` counts as a wildcard), or a 500 on an
// operation that declares both 500 and 404 while a path slot carries a
// dictionary value rather than a handle from an earlier response.
std::optional<CheckerFinding> status_mapping_checker(const ExecutedExchange& exchange,
                                                     const RequestTemplate& tmpl);

}  // namespace sbifuzz
