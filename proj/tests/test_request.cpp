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

#include "sbifuzz/error.hpp"
#include "sbifuzz/request.hpp"
#include "support.hpp"

namespace sbifuzz {
namespace {

using testing::fixtures;

Grammar udm_grammar() {
  return compile_grammar({load_resolved(fixtures() / "corpus" / "nudm_sdm.yaml", {fixtures() / "common"})},
                         testing::testbed_overlay());
}

bool has_query(const RequestParts& p, const std::string& name) {
  for (const auto& [k, v] : p.query) {
    if (k == name) return true;
  }
  return false;
}

TEST(Instantiate, AllOptionalPresent) {
  const auto g = udm_grammar();
  auto choices = ChoiceSource::canonical();
  const auto parts = instantiate_parts(*g.find("GET /nudm-sdm/v2/shared-data"), g.dictionary, {}, choices);
  EXPECT_TRUE(has_query(parts, "supported-features"));
}

TEST(Instantiate, ForcedOmissionDropsSupportedFeatures) {
  const auto g = udm_grammar();
  auto choices = ChoiceSource::replaying(std::vector<std::uint32_t>(256, 0));
  const auto parts = instantiate_parts(*g.find("GET /nudm-sdm/v2/shared-data"), g.dictionary, {}, choices);
  EXPECT_FALSE(has_query(parts, "supported-features"));
}

TEST(Instantiate, OverlaySupiInPath) {
  const auto g = udm_grammar();
  // Without a producer in the grammar the slot draws from the overlay.
  auto t = *g.find("GET /nudm-sdm/v2/{supi}/sm-data");
  t.consumes.clear();
  auto choices = ChoiceSource::canonical();
  const auto parts = instantiate_parts(t, g.dictionary, {}, choices);
  EXPECT_EQ(parts.path(), "/nudm-sdm/v2/imsi-208930000000003/sm-data");
}

TEST(Instantiate, TapeReplayIsByteIdentical) {
  const auto g = udm_grammar();
  for (const auto& t : g.templates) {
    if (!t.consumes.empty()) continue;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto rec = ChoiceSource::recording(seed);
      const auto a = instantiate(t, g.dictionary, {}, rec);
      auto rep = ChoiceSource::replaying(rec.tape());
      const auto b = instantiate(t, g.dictionary, {}, rep);
      EXPECT_EQ(a.bytes(), b.bytes()) << t.template_id;
    }
  }
}

TEST(Instantiate, ConsumedSlotNeedsBinding) {
  const auto g = udm_grammar();
  const auto* del = g.find("DELETE /nudm-sdm/v2/shared-data-subscriptions/{subscriptionId}");
  ASSERT_TRUE(del);
  auto choices = ChoiceSource::canonical();
  try {
    instantiate_parts(*del, g.dictionary, {}, choices);
    FAIL() << "instantiated without binding";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kMissingBinding);
  }
  auto again = ChoiceSource::canonical();
  const auto parts = instantiate_parts(*del, g.dictionary, {{"subscriptionId", "sdm-sub-1"}}, again);
  EXPECT_EQ(parts.path(), "/nudm-sdm/v2/shared-data-subscriptions/sdm-sub-1");
}

TEST(Seeds, DeriveSeedSeparatesStreams) {
  EXPECT_NE(derive_seed(1, 0, 0, 0), derive_seed(1, 0, 1, 0));
  EXPECT_NE(derive_seed(1, 0, 0, 0), derive_seed(2, 0, 0, 0));
  EXPECT_EQ(derive_seed(7, 3, 2, 1), derive_seed(7, 3, 2, 1));
}

TEST(Handles, BodyMemberAndLocation) {
  ExecutedExchange ex;
  ex.status = 201;
  ex.response_body = R"({"subscriptionId":"sdm-sub-00000001"})";
  ex.response_headers = {{"Location", "http://h:1/base/bdtpolicies/bdt-00000007"}};
  EXPECT_EQ(extract_handle(ex, "subscriptionId"), "sdm-sub-00000001");
  EXPECT_EQ(extract_handle(ex, "Location"), "bdt-00000007");
  ex.status = 400;
  EXPECT_FALSE(extract_handle(ex, "subscriptionId"));
}

TEST(Exchange, JsonRoundTripWithoutLatency) {
  ExecutedExchange ex;
  ex.request.method = "GET";
  ex.request.url = "http://h:1/x";
  ex.status = 200;
  ex.latency_ms = 12.5;
  ex.response_body = "{}";
  const auto j = ex.to_json();
  EXPECT_FALSE(j.dump().find("latency") != std::string::npos);
  EXPECT_EQ(ExecutedExchange::from_json(j).to_json(), j);
}

}  // namespace
}  // namespace sbifuzz
