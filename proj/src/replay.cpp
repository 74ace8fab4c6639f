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

#include "sbifuzz/replay.hpp"

#include "sbifuzz/engine.hpp"
#include "sbifuzz/error.hpp"

namespace sbifuzz {

std::map<std::string, std::string> origins_from(const HostMap& hosts) {
  std::map<std::string, std::string> out;
  for (const auto& [nf, host] : hosts.entries) out[nf] = hosts.default_scheme + "://" + host;
  return out;
}

Json ReplayOutcome::to_json() const {
  Json ex = Json::array();
  for (const auto& e : exchanges) ex.push_back(e.to_json());
  Json j{{"reproduced", reproduced}, {"observed_status", observed_status}, {"message", message}};
  j["observed_class"] = observed_class ? Json(bug_class_name(*observed_class)) : Json(nullptr);
  j["exchanges"] = ex;
  return j;
}

ReplayOutcome replay(const ReplayDocument& doc, const ReplayOptions& options,
                     std::shared_ptr<Transport> transport) {
  if (!transport) transport = std::make_shared<HttpTransport>();
  ReplayOutcome out;
  std::map<std::string, std::unique_ptr<TokenProvider>> providers;

  const auto& steps = doc.sequence.steps;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& step = steps[i];
    const auto& tmpl = doc.templates[i];
    RequestParts parts = *step.parts;
    if (auto it = options.origins.find(tmpl.nf); it != options.origins.end()) parts.origin = it->second;

    for (const auto& [slot, ref] : step.sources) {
      auto value = extract_handle(out.exchanges.at(static_cast<std::size_t>(ref.step)), ref.field);
      if (!value) {
        out.message = "step " + std::to_string(ref.step) + " yielded no " + ref.field + " for {" + slot + "}";
        return out;
      }
      parts.set_path_value(slot, *value);
      parts.bindings[slot] = *value;
    }
    auto request = assemble(parts, step.provenance);

    std::optional<SignedToken> token;
    if (!step.token_service.empty() && doc.token) {
      auto& slot = providers[step.token_service];
      if (!slot) {
        auto cfg = token_config_for(*doc.token, step.token_service, step.token_nf);
        if (options.token_endpoint) cfg.endpoint = *options.token_endpoint;
        slot = std::make_unique<TokenProvider>(cfg, transport);
      }
      try {
        token = slot->current();
      } catch (const Error& e) {
        throw Error(Errc::kTokenAcquisitionFailed, e.what());
      }
      request = attach_token(request, *token);
    }

    auto ex = make_exchange(request, transport->send(request), token);
    ex.step = static_cast<int>(i);
    out.exchanges.push_back(ex);
    if (ex.failed()) {
      out.message = "transport failure: " + *ex.transport_error;
      return out;
    }
  }

  const auto& last = out.exchanges.back();
  const auto& tmpl = doc.templates.back();
  out.observed_status = last.status;
  std::optional<BugCandidate> c;
  if (doc.checker == kCrossServiceToken) {
    CrossServiceProbe probe{steps.back().token_service, steps.back().token_nf, &tmpl, *steps.back().parts};
    auto finding = judge_cross_service(probe, last);
    if (finding) c = classify(last, tmpl, &*finding);
  }
  if (!c) {
    auto finding = status_mapping_checker(last, tmpl);
    c = classify(last, tmpl, finding ? &*finding : nullptr);
  }
  if (c) out.observed_class = c->bug_class;
  out.reproduced = c && c->bug_class == doc.expected_class && last.status == doc.expected_status;
  out.message = out.reproduced
                    ? "reproduced " + std::string(bug_class_name(doc.expected_class)) + " (status " +
                          std::to_string(last.status) + ")"
                    : "not reproduced: expected " + std::string(bug_class_name(doc.expected_class)) +
                          " with status " + std::to_string(doc.expected_status) + ", observed " +
                          (c ? std::string(bug_class_name(c->bug_class)) : std::string("no bug")) +
                          " with status " + std::to_string(last.status);
  return out;
}

ReplayOutcome replay_file(const std::filesystem::path& path, const ReplayOptions& options,
                          std::shared_ptr<Transport> transport) {
  auto j = Json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::kParseError, "replay file is not JSON: " + path.string());
  ReplayDocument doc;
  try {
    doc = ReplayDocument::from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParseError, path.string() + ": " + e.what());
  }
  return replay(doc, options, std::move(transport));
}

}  // namespace sbifuzz
