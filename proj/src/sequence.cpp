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

#include "sbifuzz/sequence.hpp"

#include <set>

#include "sbifuzz/error.hpp"

namespace sbifuzz {

Json HandleRef::to_json() const { return Json{{"step", step}, {"field", field}}; }

HandleRef HandleRef::from_json(const Json& j) {
  return HandleRef{j.at("step").get<int>(), j.at("field").get<std::string>()};
}

Json SequenceStep::to_json() const {
  Json src = Json::object();
  for (const auto& [slot, ref] : sources) src[slot] = ref.to_json();
  Json j{{"template_id", template_id}, {"sources", src}};
  j["parts"] = parts ? parts->to_json() : Json(nullptr);
  j["provenance"] = provenance.to_json();
  j["token_service"] = token_service;
  j["token_nf"] = token_nf;
  return j;
}

SequenceStep SequenceStep::from_json(const Json& j) {
  SequenceStep s;
  s.template_id = j.at("template_id").get<std::string>();
  if (j.contains("sources")) {
    for (const auto& [slot, ref] : j.at("sources").items()) s.sources[slot] = HandleRef::from_json(ref);
  }
  if (j.contains("parts") && j.at("parts").is_object()) s.parts = RequestParts::from_json(j.at("parts"));
  if (j.contains("provenance")) s.provenance = Provenance::from_json(j.at("provenance"));
  s.token_service = j.value("token_service", "");
  s.token_nf = j.value("token_nf", "");
  return s;
}

std::string TestSequence::describe() const {
  std::string out;
  for (const auto& s : steps) {
    if (!out.empty()) out += " -> ";
    out += s.template_id;
  }
  return out;
}

Json TestSequence::to_json() const {
  Json arr = Json::array();
  for (const auto& s : steps) arr.push_back(s.to_json());
  return Json{{"steps", arr}};
}

TestSequence TestSequence::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("steps") || !j.at("steps").is_array()) {
    throw Error(Errc::kParseError, "sequence needs a steps array");
  }
  TestSequence seq;
  for (const auto& s : j.at("steps")) seq.steps.push_back(SequenceStep::from_json(s));
  for (std::size_t i = 0; i < seq.steps.size(); ++i) {
    for (const auto& [slot, ref] : seq.steps[i].sources) {
      if (ref.step < 0 || static_cast<std::size_t>(ref.step) >= i) {
        throw Error(Errc::kParseError, "step " + std::to_string(i) + " slot " + slot +
                                           " refers to a later step");
      }
    }
  }
  return seq;
}

TestSequence minimal_sequence(const TestSequence& seq, std::size_t last) {
  if (last >= seq.steps.size()) throw Error(Errc::kConfigError, "step index out of range");
  std::set<std::size_t> keep{last};
  for (std::size_t i = last + 1; i-- > 0;) {
    if (!keep.count(i)) continue;
    for (const auto& [slot, ref] : seq.steps[i].sources) keep.insert(static_cast<std::size_t>(ref.step));
  }
  std::map<std::size_t, int> renumber;
  TestSequence out;
  for (auto i : keep) {
    renumber[i] = static_cast<int>(out.steps.size());
    auto step = seq.steps[i];
    for (auto& [slot, ref] : step.sources) ref.step = renumber.at(static_cast<std::size_t>(ref.step));
    out.steps.push_back(std::move(step));
  }
  return out;
}

}  // namespace sbifuzz
