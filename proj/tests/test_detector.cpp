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

#include "sbifuzz/detector.hpp"
#include "support.hpp"

namespace sbifuzz {
namespace {

using testing::fixtures;

const Grammar& udm() {
  static const Grammar g = compile_grammar(
      {load_resolved(fixtures() / "corpus" / "nudm_sdm.yaml", {fixtures() / "common"})}, testing::testbed_overlay());
  return g;
}

ExecutedExchange exchange(const std::string& template_id, int status, const std::string& body) {
  ExecutedExchange ex;
  ex.request.method = template_id.substr(0, template_id.find(' '));
  ex.request.url = "http://127.0.0.1:29511" + template_id.substr(template_id.find(' ') + 1);
  ex.request.provenance.template_id = template_id;
  ex.status = status;
  ex.response_body = body;
  return ex;
}

const std::string kShared = "GET /nudm-sdm/v2/shared-data";
const std::string kSmData = "GET /nudm-sdm/v2/{supi}/sm-data";

TEST(Classify, UndeclaredFiveHundred) {
  const auto c = classify(exchange(kShared, 500, "{}"), *udm().find(kShared));
  ASSERT_TRUE(c);
  EXPECT_EQ(c->bug_class, BugClass::kUnhandledError500);
  EXPECT_EQ(c->checker(), "explore");
}

TEST(Classify, DeclaredNotFoundIsNoBug) { EXPECT_FALSE(classify(exchange(kSmData, 404, "{}"), *udm().find(kSmData))); }

TEST(Classify, CrossServiceNeedsSuccess) {
  CheckerFinding f;
  f.checker_name = std::string(kCrossServiceToken);
  f.kind = "scope-bypass";
  const auto& t = *udm().find(kShared);
  const auto ok = classify(exchange(kShared, 200, "[]"), t, &f);
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->bug_class, BugClass::kAuthzScopeBypass);
  EXPECT_EQ(ok->checker(), kCrossServiceToken);
  EXPECT_FALSE(classify(exchange(kShared, 403, "{}"), t, &f));
}

TEST(Normalize, Placeholders) {
  EXPECT_EQ(normalize_body(R"({"id":"8f3c2a10-0000-4000-8000-000000000005","at":"2026-01-01T00:00:00Z","n":123456,"s":12})"),
            R"({"id":"<uuid>","at":"<ts>","n":<num>,"s":12})");
}

BugCandidate candidate(const std::string& template_id, int status, const std::string& body) {
  return *classify(exchange(template_id, status, body), *udm().find(template_id));
}

std::int64_t fixed_clock() { return TestbedConfig::kFrozenNow; }

TEST(Bucket, UuidOnlyDifferenceSharesBucket) {
  const auto buckets = bucket({candidate(kShared, 500, R"({"trace":"8f3c2a10-0000-4000-8000-000000000001"})"),
                               candidate(kShared, 500, R"({"trace":"8f3c2a10-0000-4000-8000-000000000002"})")},
                              fixed_clock);
  ASSERT_EQ(buckets.size(), 1u);
  EXPECT_EQ(buckets.begin()->second.occurrence_count, 2u);
  EXPECT_EQ(buckets.begin()->second.first_seen, "2026-01-01T00:00:00Z");
}

TEST(Bucket, DistinctEndpointsAndStatuses) {
  EXPECT_EQ(bucket({candidate(kShared, 500, "{}"), candidate(kSmData, 500, "{}")}).size(), 2u);
  BugCandidate a = candidate(kShared, 500, "{}");
  BugCandidate b = a;
  b.evidence.status = 503;
  EXPECT_EQ(bucket({a, b}).size(), 2u);
}

TEST(Detector, IngestReportsNewBuckets) {
  Detector d(fixed_clock);
  EXPECT_TRUE(d.ingest(candidate(kShared, 500, "{}")));
  EXPECT_FALSE(d.ingest(candidate(kShared, 500, "{}")));
  EXPECT_EQ(d.count_by_class().at("UnhandledError500"), 1u);
  EXPECT_EQ(d.bucket_keys().size(), 1u);
}

TEST(Sequence, MinimalKeepsTransitiveSources) {
  TestSequence s;
  s.steps.resize(4);
  s.steps[0].template_id = "POST /a";
  s.steps[1].template_id = "GET /b";
  s.steps[2].template_id = "GET /a/{id}";
  s.steps[2].sources["id"] = HandleRef{0, "id"};
  s.steps[3].template_id = "DELETE /a/{id}";
  s.steps[3].sources["id"] = HandleRef{2, "id"};
  const auto m = minimal_sequence(s, 3);
  ASSERT_EQ(m.steps.size(), 3u);
  EXPECT_EQ(m.steps[1].template_id, "GET /a/{id}");
  EXPECT_EQ(m.steps[2].sources.at("id").step, 1);
  EXPECT_EQ(TestSequence::from_json(m.to_json()).to_json(), m.to_json());
}

TEST(Sequence, ForwardReferenceRejected) {
  TestSequence s;
  s.steps.resize(2);
  s.steps[0].sources["id"] = HandleRef{1, "id"};
  EXPECT_ANY_THROW(TestSequence::from_json(s.to_json()));
}

TEST(Report, WriteThenLoad) {
  auto c = candidate(kShared, 500, R"({"cause":"RUNTIME_PANIC:index-oob"})");
  SequenceStep step;
  step.template_id = kShared;
  RequestParts parts;
  parts.template_id = kShared;
  parts.method = "GET";
  parts.origin = "http://127.0.0.1:29511";
  parts.path_template = "/nudm-sdm/v2/shared-data";
  step.parts = parts;
  c.minimal_sequence.steps.push_back(step);
  const auto reports = bucket({c}, fixed_clock);
  const auto& report = reports.begin()->second;
  const auto replay = build_replay(report, udm(), std::nullopt);
  const auto dir = testing::scratch_dir("reports");
  const auto bucket_dir = write_report(report, replay, dir);
  EXPECT_TRUE(std::filesystem::exists(bucket_dir / "report.json"));
  ASSERT_TRUE(std::filesystem::exists(bucket_dir / "replay.json"));
  const auto doc = ReplayDocument::from_json(Json::parse(read_file(bucket_dir / "replay.json")));
  EXPECT_EQ(doc.sequence.to_json(), c.minimal_sequence.to_json());
  EXPECT_EQ(doc.expected_class, BugClass::kUnhandledError500);
  EXPECT_EQ(doc.expected_status, 500);
  const auto loaded = load_reports(dir);
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].key, report.key);
  EXPECT_NE(summary_table(loaded).find("UnhandledError500"), std::string::npos);
}

TEST(Report, BuildReplayNeedsTemplates) {
  auto c = candidate(kShared, 500, "{}");
  SequenceStep step;
  step.template_id = "GET /not-in-grammar";
  c.minimal_sequence.steps.push_back(step);
  const auto reports = bucket({c});
  EXPECT_ANY_THROW(build_replay(reports.begin()->second, udm(), std::nullopt));
}

TEST(Rfc3339, Formats) { EXPECT_EQ(format_rfc3339(0), "1970-01-01T00:00:00Z"); }

}  // namespace
}  // namespace sbifuzz
