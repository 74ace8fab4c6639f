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

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "sbifuzz/engine.hpp"
#include "sbifuzz/grammar.hpp"
#include "sbifuzz/mock_core.hpp"
#include "sbifuzz/spec_loader.hpp"

namespace sbifuzz::testing {

inline std::filesystem::path fixtures() { return SBIFUZZ_FIXTURES_DIR; }

inline const std::string& test_secret() {
  static const std::string s = "test-secret-0123456789abcdefghijklmnop";
  return s;
}

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

// The four producer specs a campaign targets.
std::vector<std::filesystem::path> campaign_specs();
std::vector<std::filesystem::path> corpus_specs();

std::map<std::string, std::vector<Json>> testbed_overlay();

std::unique_ptr<Testbed> start_testbed(const std::set<BugFlag>& bugs, VerifierMode mode,
                                       int base_port = 0, bool deterministic = true);

// Grammar compiled from the campaign specs, pointed at `bed`.
Grammar testbed_grammar(const Testbed& bed);

// campaign.yaml with grammar, targets and token endpoint re-pointed at `bed`.
CampaignConfig testbed_campaign(const Testbed& bed, const std::filesystem::path& grammar_path);

// GET with an optional bearer token.
HttpResponse http_get(const std::string& url, const std::string& bearer = "");

}  // namespace sbifuzz::testing
