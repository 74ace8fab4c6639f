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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbifuzz/http.hpp"
#include "sbifuzz/request.hpp"

namespace sbifuzz {

// Names the earlier step and response field a path slot is filled from.
struct HandleRef {
  int step = 0;
  std::string field;

  bool operator==(const HandleRef&) const = default;
  Json to_json() const;
  static HandleRef from_json(const Json& j);
};

struct SequenceStep {
  std::string template_id;
  std::map<std::string, HandleRef> sources;  // slot -> producer
  // Set once executed.
  std::optional<RequestParts> parts;
  Provenance provenance;
  // Token presented: scope and the NF it was requested for. Empty when none.
  std::string token_service;
  std::string token_nf;

  Json to_json() const;
  static SequenceStep from_json(const Json& j);
};

struct TestSequence {
  std::vector<SequenceStep> steps;

  // "GET /a -> DELETE /a/{id}"
  std::string describe() const;
  Json to_json() const;
  static TestSequence from_json(const Json& j);
};

// Step `last` and every step it transitively takes handles from, in the
// original order, with HandleRef indices rewritten.
TestSequence minimal_sequence(const TestSequence& seq, std::size_t last);

}  // namespace sbifuzz
