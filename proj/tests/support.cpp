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

#include "support.hpp"

#include <atomic>
#include <unistd.h>

#include "sbifuzz/error.hpp"
#include "sbifuzz/yaml_io.hpp"

namespace sbifuzz::testing {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = fs::temp_directory_path() /
             ("sbifuzz-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<fs::path> campaign_specs() {
  const auto dir = fixtures() / "corpus";
  return {dir / "nnrf_nfdiscovery.yaml", dir / "nudm_sdm.yaml", dir / "nnssf_nssaiavailability.yaml",
          dir / "npcf_bdtpolicycontrol.yaml"};
}

std::vector<fs::path> corpus_specs() {
  auto specs = campaign_specs();
  specs.insert(specs.begin(), fixtures() / "corpus" / "nnrf_accesstoken.yaml");
  return specs;
}

std::map<std::string, std::vector<Json>> testbed_overlay() {
  std::map<std::string, std::vector<Json>> out;
  const auto j = parse_yaml(read_file(fixtures() / "testbed" / "overlay.yaml"));
  for (const auto& [k, v] : j.items()) {
    for (const auto& e : v) out[k].push_back(e);
  }
  return out;
}

std::unique_ptr<Testbed> start_testbed(const std::set<BugFlag>& bugs, VerifierMode mode,
                                       int base_port, bool deterministic) {
  TestbedConfig cfg;
  cfg.key = key_from_string(test_secret());
  cfg.bugs = bugs;
  cfg.verifier_mode = mode;
  cfg.deterministic = deterministic;
  if (base_port > 0) cfg.use_base_port(base_port);
  return Testbed::start(cfg);
}

Grammar testbed_grammar(const Testbed& bed) {
  std::vector<ResolvedSpec> specs;
  for (const auto& p : campaign_specs()) {
    specs.push_back(rewrite_servers(load_resolved(p, {fixtures() / "common"}), bed.host_map()));
  }
  return compile_grammar(specs, testbed_overlay());
}

CampaignConfig testbed_campaign(const Testbed& bed, const fs::path& grammar_path) {
  auto cfg = CampaignConfig::load(fixtures() / "testbed" / "campaign.yaml");
  cfg.grammar_path = grammar_path;
  cfg.targets.clear();
  for (const auto& nf : TestbedConfig::kNfNames) cfg.targets.push_back(bed.base_url(std::string(nf)));
  cfg.token->endpoint = bed.token_endpoint();
  return cfg;
}

HttpResponse http_get(const std::string& url, const std::string& bearer) {
  ConcreteRequest req;
  req.method = "GET";
  req.url = url;
  if (!bearer.empty()) req.headers.emplace_back("Authorization", "Bearer " + bearer);
  HttpTransport transport;
  return transport.send(req);
}

}  // namespace sbifuzz::testing
