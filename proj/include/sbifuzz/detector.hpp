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

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sbifuzz/checkers.hpp"
#include "sbifuzz/grammar.hpp"
#include "sbifuzz/oauth.hpp"
#include "sbifuzz/sequence.hpp"

namespace sbifuzz {

enum class BugClass { kUnhandledError500, kStatusMappingViolation, kAuthzScopeBypass, kUndeclaredStatus };

std::string_view bug_class_name(BugClass c);
std::optional<BugClass> parse_bug_class(std::string_view text);

struct BugCandidate {
  BugClass bug_class = BugClass::kUnhandledError500;
  ExecutedExchange evidence;
  std::optional<CheckerFinding> finding;  // set when the class came from a checker
  TestSequence minimal_sequence;

  // Finding's checker, else the mutation family of the request ("explore").
  std::string checker() const;
  Json to_json() const;
  static BugCandidate from_json(const Json& j);
};

// Raw 500 wins unless the operation declares 500; then only checker findings
// classify. Cross-service findings count only with a 2xx status.
std::optional<BugCandidate> classify(const ExecutedExchange& exchange, const RequestTemplate& tmpl,
                                     const CheckerFinding* finding = nullptr);

// uuids -> <uuid>, RFC 3339 timestamps -> <ts>, digit runs of 4+ -> <num>,
// applied in that order.
std::string normalize_body(std::string_view body);
std::string body_fingerprint(std::string_view body);

struct BucketKey {
  BugClass bug_class = BugClass::kUnhandledError500;
  std::string endpoint;  // "GET /nudm-sdm/v2/shared-data"
  std::string checker;
  int status = 0;
  std::string fingerprint;

  auto operator<=>(const BucketKey&) const = default;
  std::string str() const;
  // Filesystem-safe, unique per key.
  std::string dir_name() const;
  Json to_json() const;
  static BucketKey from_json(const Json& j);
};

BucketKey bucket_key(const BugCandidate& candidate);

struct BugReport {
  BucketKey key;
  std::string first_seen;  // RFC 3339, UTC
  std::uint64_t occurrence_count = 0;
  BugCandidate first;

  Json to_json() const;
  static BugReport from_json(const Json& j);
};

class Detector {
 public:
  explicit Detector(Clock clock = system_now) : clock_(std::move(clock)) {}

  // True when the candidate opened a new bucket.
  bool ingest(BugCandidate candidate);

  const std::map<BucketKey, BugReport>& reports() const { return reports_; }
  std::set<std::string> bucket_keys() const;
  std::map<std::string, std::uint64_t> count_by_class() const;

 private:
  Clock clock_;
  std::map<BucketKey, BugReport> reports_;
};

std::map<BucketKey, BugReport> bucket(const std::vector<BugCandidate>& candidates,
                                      Clock clock = system_now);

// Everything needed to re-run a report's sequence with only the token
// configuration at hand.
struct ReplayDocument {
  TestSequence sequence;
  std::vector<RequestTemplate> templates;  // one per step
  BugClass expected_class = BugClass::kUnhandledError500;
  int expected_status = 0;
  std::string checker;
  std::optional<TokenProviderConfig> token;  // absent when requests went unauthenticated

  Json to_json() const;
  static ReplayDocument from_json(const Json& j);
};

// Throws kConfigError when a step's template is missing from the grammar.
ReplayDocument build_replay(const BugReport& report, const Grammar& grammar,
                            const std::optional<TokenProviderConfig>& token);

// `<out_dir>/<bucket>/report.json` and `replay.json`; returns the bucket dir.
std::filesystem::path write_report(const BugReport& report, const ReplayDocument& replay,
                                   const std::filesystem::path& out_dir);

// Reads every `*/report.json` under `dir`, sorted by bucket key.
std::vector<BugReport> load_reports(const std::filesystem::path& dir);

// class x endpoint x count, one row per bucket.
std::string summary_table(const std::vector<BugReport>& reports);

std::string format_rfc3339(std::int64_t unix_seconds);

}  // namespace sbifuzz
