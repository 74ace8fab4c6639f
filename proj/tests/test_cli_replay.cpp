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

#include <gtest/gtest.h>

#include <sstream>

#include "sbifuzz/cli.hpp"
#include "sbifuzz/replay.hpp"
#include "support.hpp"

namespace sbifuzz {
namespace {

using testing::fixtures;

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out) *out = o.str() + e.str();
  return code;
}

TEST(Cli, UnknownSubcommandIsUsage) { EXPECT_EQ(cli({"frobnicate"}), kExitUsage); }

TEST(Cli, NoArgumentsIsUsage) { EXPECT_EQ(cli({}), kExitUsage); }

TEST(Cli, BundleWritesSelfContainedSpecs) {
  const auto dir = testing::scratch_dir("cli-bundle");
  std::vector<std::string> args = {"bundle"};
  for (const auto& p : testing::corpus_specs()) args.push_back(p.string());
  args.insert(args.end(), {"-o", dir.string(), "--search-dir", (fixtures() / "common").string()});
  ASSERT_EQ(cli(args), kExitOk);
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    ++files;
    EXPECT_EQ(read_file(entry.path()).find(".yaml#"), std::string::npos) << entry.path();
  }
  EXPECT_EQ(files, testing::corpus_specs().size());
}

TEST(Cli, CompileThenReportEmpty) {
  const auto dir = testing::scratch_dir("cli-compile");
  std::string out;
  ASSERT_EQ(cli({"compile", (fixtures() / "deps" / "subscriptions.yaml").string(), "-o", (dir / "g.json").string()}, &out),
            kExitOk)
      << out;
  EXPECT_EQ(Grammar::load(dir / "g.json").templates.size(), 3u);
  EXPECT_EQ(cli({"report", dir.string()}), kExitOk);
}

TEST(Cli, BadCampaignIsUsage) {
  const auto dir = testing::scratch_dir("cli-bad");
  write_file(dir / "c.yaml", "grammar: g.json\ntargets: []\n");
  EXPECT_EQ(cli({"fuzz", "-c", (dir / "c.yaml").string(), "-o", (dir / "out").string()}), kExitUsage);
}

// GET shared-data without supported-features, the B1 trigger.
ReplayDocument b1_document(const Grammar& g, const std::string& token_endpoint) {
  const auto& t = *g.find("GET /nudm-sdm/v2/shared-data");
  auto choices = ChoiceSource::replaying(std::vector<std::uint32_t>(64, 0));
  SequenceStep step;
  step.template_id = t.template_id;
  step.parts = instantiate_parts(t, g.dictionary, {}, choices);
  step.provenance.template_id = t.template_id;
  step.token_service = t.service;
  step.token_nf = t.nf;
  ReplayDocument doc;
  doc.sequence.steps.push_back(step);
  doc.templates.push_back(t);
  doc.expected_class = BugClass::kUnhandledError500;
  doc.expected_status = 500;
  doc.checker = "explore";
  TokenProviderConfig token;
  token.endpoint = token_endpoint;
  token.request = TokenRequest{"8f3c2a10-0000-4000-8000-000000000005", "SMF", "UDM", "nudm-sdm", {}, {}};
  doc.token = token;
  return doc;
}

TEST(Replay, BugOneWithAndWithoutFlag) {
  auto recorded_on = testing::start_testbed({BugFlag::kB1}, VerifierMode::kCorrect);
  const auto g = testing::testbed_grammar(*recorded_on);
  const auto dir = testing::scratch_dir("replay");
  write_file(dir / "replay.json", b1_document(g, recorded_on->token_endpoint()).to_json().dump(2));
  recorded_on->shutdown();

  for (bool flag : {true, false}) {
    auto bed = testing::start_testbed(flag ? std::set<BugFlag>{BugFlag::kB1} : std::set<BugFlag>{},
                                      VerifierMode::kCorrect);
    ReplayOptions options;
    options.origins = origins_from(bed->host_map());
    options.token_endpoint = bed->token_endpoint();
    const auto outcome = replay_file(dir / "replay.json", options);
    EXPECT_EQ(outcome.reproduced, flag) << outcome.message;
    EXPECT_EQ(outcome.observed_status, flag ? 500 : 200);
    if (!flag) EXPECT_EQ(outcome.message.rfind("not reproduced", 0), 0u);

    std::vector<std::string> args = {"replay", (dir / "replay.json").string(), "--token-endpoint",
                                     bed->token_endpoint()};
    for (const auto& [nf, origin] : options.origins) args.insert(args.end(), {"--host", nf + "=" + origin});
    EXPECT_EQ(cli(args), flag ? kExitBugs : kExitOk);
  }
}

}  // namespace
}  // namespace sbifuzz
