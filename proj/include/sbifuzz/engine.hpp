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

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sbifuzz/checkers.hpp"
#include "sbifuzz/detector.hpp"
#include "sbifuzz/grammar.hpp"
#include "sbifuzz/oauth.hpp"
#include "sbifuzz/request.hpp"
#include "sbifuzz/sequence.hpp"
#include "sbifuzz/spec_loader.hpp"

namespace sbifuzz {

struct CheckerSettings {
  bool payload_body = true;
  bool optional_omission = true;
  bool malformed_value = true;
  bool cross_service_token = true;
  bool status_mapping = true;
  std::size_t payload_cap = 64;    // variants per template, 0 = unlimited
  std::size_t malformed_cap = 64;

  Json to_json() const;
  static CheckerSettings from_json(const Json& j);
};

struct CampaignConfig {
  std::filesystem::path grammar_path;
  std::vector<std::string> targets;  // allowlisted origins, "http://host:port"
  std::uint64_t budget = 20000;
  int max_sequence_length = 4;
  std::uint64_t seed = 0;
  CheckerSettings checkers;
  double rate_limit = 0;  // requests/s per target, 0 = unlimited
  std::optional<TokenProviderConfig> token;  // absent: no Authorization header
  int workers = 1;
  int renderings = 3;  // value draws per planned sequence
  double optional_presence = 0.75;
  int retries = 1;  // on transport failure only
  // Re-points template origins by NF; absent keeps the grammar's origins.
  std::optional<HostMap> hosts;

  // YAML or JSON. Relative paths resolve against the file's directory.
  static CampaignConfig load(const std::filesystem::path& path);
  static CampaignConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  Json to_json() const;
  // Throws kConfigError.
  void validate() const;
  bool allows(const std::string& url) const;
};

// Minimum spacing between requests to the same origin, shared by workers.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second);
  void acquire(const std::string& origin);

 private:
  std::chrono::steady_clock::duration interval_{};
  std::mutex mu_;
  std::map<std::string, std::chrono::steady_clock::time_point> next_;
};

// Breadth-first over sequence length. next() yields every sequence of the
// current length before any longer one; retain() feeds back an execution
// whose steps all returned 2xx.
class SequencePlanner {
 public:
  SequencePlanner(const Grammar& grammar, int max_length);

  std::optional<TestSequence> next();
  void retain(const TestSequence& executed);
  // Length of the sequences currently handed out.
  int level() const { return level_; }
  // Sequences of the current length not yet handed out.
  std::size_t pending() const { return current_.size(); }

 private:
  std::vector<TestSequence> extend(const TestSequence& prefix) const;

  const Grammar& grammar_;
  int max_length_;
  int level_ = 1;
  std::deque<TestSequence> current_;
  std::vector<TestSequence> retained_;
  std::vector<const RequestTemplate*> roots_;   // dependency-free, by id
  std::vector<const RequestTemplate*> sorted_;  // all, by id
};

// Looks up the token for a (service, nf); nullopt sends none.
using TokenSource =
    std::function<std::optional<SignedToken>(const std::string& service, const std::string& nf)>;

struct ExecutionHooks {
  Transport* transport = nullptr;
  TokenSource tokens;
  // Called before every attempt; false stops the sequence (budget, allowlist).
  std::function<bool(const ConcreteRequest&)> admit;
  std::function<void(const ExecutedExchange&)> sink;
  int retries = 1;
};

struct SequenceRun {
  TestSequence executed;  // steps that were sent, parts and provenance filled
  std::vector<ExecutedExchange> exchanges;  // final attempt per step
  bool all_success = false;
  bool stopped = false;  // admit() refused
};

// Runs the steps in order. Steps carrying a decision tape replay it; the
// others draw from `choices_for(step)`. Handles come from 2xx responses of
// the steps named in `sources`. A transport failure ends the run after the
// retries; a missing handle ends it before the consumer is sent.
SequenceRun execute_sequence(const TestSequence& plan, const Grammar& grammar,
                             const ExecutionHooks& hooks,
                             const std::function<ChoiceSource(std::size_t step)>& choices_for,
                             const InstantiateOptions& options = {});

// Sends one request with retries; every attempt reaches the sink. nullopt
// when admit() refused the first attempt.
std::optional<ExecutedExchange> send_with_retries(const ConcreteRequest& request,
                                                  const std::optional<SignedToken>& token,
                                                  const ExecutionHooks& hooks);

struct CampaignSummary {
  std::uint64_t requests_sent = 0;
  std::uint64_t sequences_executed = 0;
  std::map<std::string, std::uint64_t> bug_count_by_class;
  double wall_time_s = 0;
  std::uint64_t transport_failures = 0;
  std::vector<std::string> bucket_keys;  // sorted
  std::vector<std::string> token_diagnostics;

  Json to_json() const;
};

// Writes `exchanges.ndjson`, one directory per bucket and `summary.json`
// into `out_dir`. `transport` defaults to HTTP/1.1.
CampaignSummary run_campaign(const CampaignConfig& config, const std::filesystem::path& out_dir,
                             std::shared_ptr<Transport> transport = nullptr);

// Loads a grammar and re-points its origins through `hosts`.
Grammar load_campaign_grammar(const CampaignConfig& config);

// Token request for a service: scope = service, target = upper-cased NF.
TokenProviderConfig token_config_for(const TokenProviderConfig& base, const std::string& service,
                                     const std::string& nf);

}  // namespace sbifuzz
