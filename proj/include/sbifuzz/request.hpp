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
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sbifuzz/grammar.hpp"
#include "sbifuzz/http.hpp"
#include "sbifuzz/oauth.hpp"

namespace sbifuzz {

// Source of every decision made while instantiating a template. Recording
// sources draw from an RNG and keep the tape; replaying sources read a tape
// back; canonical sources take the first choice and include every optional
// member. All three write the tape, so a canonical request replays too.
class ChoiceSource {
 public:
  static ChoiceSource recording(std::uint64_t seed);
  static ChoiceSource replaying(std::vector<std::uint32_t> tape);
  static ChoiceSource canonical();

  // Index in [0, n); n == 0 is treated as 1.
  std::uint32_t pick(std::uint32_t n);
  bool coin(double p);

  const std::vector<std::uint32_t>& tape() const { return tape_; }
  std::uint64_t seed() const { return seed_; }

 private:
  enum class Mode { kRecord, kReplay, kCanonical };
  ChoiceSource(Mode mode, std::uint64_t seed) : mode_(mode), seed_(seed), rng_(seed) {}

  Mode mode_;
  std::uint64_t seed_ = 0;
  std::mt19937_64 rng_;
  std::vector<std::uint32_t> tape_;
  std::size_t cursor_ = 0;
};

// splitmix64 over the inputs; used to give every rendering its own stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

struct InstantiateOptions {
  double optional_presence = 0.75;
  int max_depth = 4;
};

// A request before serialization. Checkers edit these and re-assemble.
struct RequestParts {
  std::string template_id;
  std::string method;
  std::string origin;
  std::string path_template;
  std::vector<std::pair<std::string, std::string>> path_values;  // slot -> raw value
  std::vector<std::pair<std::string, std::string>> query;        // name -> raw value
  Headers headers;
  std::optional<Json> body;
  std::optional<std::string> raw_body;  // wins over `body` when set
  std::string media_type;
  std::map<std::string, std::string> bindings;  // slots filled from handles

  std::string path() const;
  std::string url() const;
  std::string body_text() const;
  void set_path_value(const std::string& slot, const std::string& value);

  Json to_json() const;
  static RequestParts from_json(const Json& j);
};

std::string render_scalar(const Json& value);
std::string serialize_body(const Json& body, const std::string& media_type);

// Throws kMissingBinding when a consumed slot has no binding.
RequestParts instantiate_parts(const RequestTemplate& tmpl, const FuzzDictionary& dict,
                               const std::map<std::string, std::string>& bindings,
                               ChoiceSource& choices, const InstantiateOptions& options = {});

ConcreteRequest assemble(const RequestParts& parts, Provenance provenance);

ConcreteRequest instantiate(const RequestTemplate& tmpl, const FuzzDictionary& dict,
                            const std::map<std::string, std::string>& bindings,
                            ChoiceSource& choices, const InstantiateOptions& options = {});

struct ExecutedExchange {
  ConcreteRequest request;
  int status = 0;
  Headers response_headers;
  std::string response_body;
  double latency_ms = 0;
  std::optional<std::string> transport_error;
  std::optional<AccessTokenClaims> token_claims;
  std::uint64_t sequence_index = 0;
  int rendering = 0;
  int step = 0;

  bool failed() const { return transport_error.has_value(); }
  bool success() const { return !failed() && status >= 200 && status <= 299; }

  // Latency is left out so logs of identical runs compare equal.
  Json to_json() const;
  static ExecutedExchange from_json(const Json& j);
};

ExecutedExchange make_exchange(const ConcreteRequest& request, const HttpResponse& response,
                               const std::optional<SignedToken>& token);

// Value of a handle in a 2xx response: a top-level body member, or the last
// path segment of the Location header.
std::optional<std::string> extract_handle(const ExecutedExchange& exchange,
                                          const std::string& field);

}  // namespace sbifuzz
