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

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sbifuzz/oauth.hpp"
#include "sbifuzz/spec_loader.hpp"
#include "sbifuzz/util.hpp"

namespace sbifuzz {

enum class BugFlag { kB1 = 1, kB2, kB3, kB4, kB5, kB6, kB7, kB8 };

std::string bug_flag_name(BugFlag flag);
std::optional<BugFlag> parse_bug_flag(std::string_view text);
// "B1,B3,B8" or "all" or "" (none). Throws kConfigError on unknown names.
std::set<BugFlag> parse_bug_flags(std::string_view text);

// Subscriber data served by the stubs.
struct SeedData {
  std::vector<std::string> supis;
  std::map<std::string, std::string> ue_ids;  // gpsi -> supi
  std::vector<Json> shared_data;              // SharedData records
  std::vector<Snssai> served_snssais;

  static SeedData defaults();
  static SeedData from_json(const Json& j);
  Json to_json() const;
};

struct TestbedConfig {
  std::string bind_host = "127.0.0.1";
  // nf name ("nrf", "udm", "nssf", "pcf") -> port; 0 or absent picks a free port
  std::map<std::string, int> ports;
  Key key;
  VerifierMode verifier_mode = VerifierMode::kCorrect;
  std::map<std::string, VerifierMode> verifier_overrides;  // per nf
  std::set<BugFlag> bugs;
  SeedData seed = SeedData::defaults();
  bool deterministic = false;
  bool crash_hard = false;  // a panicking route answers 503 until restart
  std::int64_t token_ttl = 3600;
  ClaimCompleteness claim_mode = ClaimCompleteness::kFull;
  // Token clock; deterministic mode freezes it at kFrozenNow when unset.
  Clock clock;

  static constexpr std::int64_t kFrozenNow = 1767225600;  // 2026-01-01T00:00:00Z
  static constexpr std::string_view kNfNames[] = {"nrf", "udm", "nssf", "pcf"};

  // Ports base, base+1, ... in kNfNames order.
  void use_base_port(int base);
  VerifierMode mode_for(const std::string& nf) const;
  bool has(BugFlag flag) const { return bugs.count(flag) > 0; }
};

class Testbed {
 public:
  // Throws kBindError when a port is taken.
  static std::unique_ptr<Testbed> start(TestbedConfig config);
  ~Testbed();

  Testbed(const Testbed&) = delete;
  Testbed& operator=(const Testbed&) = delete;

  // "http://127.0.0.1:port"
  std::string base_url(const std::string& nf) const;
  int port(const std::string& nf) const;
  std::string token_endpoint() const { return base_url("nrf") + "/oauth2/token"; }
  HostMap host_map() const;
  const TestbedConfig& config() const;
  // NF instance id used as the token audience alternative and issuer.
  std::string instance_id(const std::string& nf) const;

  void shutdown();

 private:
  struct Impl;
  explicit Testbed(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

// Cause strings carried in simulated-panic bodies.
std::string panic_cause(BugFlag flag);

}  // namespace sbifuzz
