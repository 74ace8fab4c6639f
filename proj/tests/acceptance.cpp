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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "sbifuzz/detector.hpp"
#include "sbifuzz/error.hpp"
#include "sbifuzz/replay.hpp"
#include "support.hpp"

using namespace sbifuzz;
using namespace sbifuzz::testing;
namespace fs = std::filesystem;

namespace {

constexpr int kCampaignPort = 29710;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct CampaignRun {
  CampaignSummary summary;
  fs::path out;
  std::vector<BugReport> reports;
};

CampaignRun run_on_fresh_testbed(const std::set<BugFlag>& bugs, VerifierMode mode,
                                 const std::string& tag) {
  auto bed = start_testbed(bugs, mode, kCampaignPort);
  const auto dir = scratch_dir(tag);
  const auto grammar_path = dir / "grammar.json";
  testbed_grammar(*bed).save(grammar_path);
  auto cfg = testbed_campaign(*bed, grammar_path);
  CampaignRun run;
  run.out = dir / "reports";
  run.summary = run_campaign(cfg, run.out);
  run.reports = load_reports(run.out);
  bed->shutdown();
  return run;
}

std::optional<std::string> body_cause(const BugReport& r) {
  auto j = Json::parse(r.first.evidence.response_body, nullptr, false);
  if (!j.is_object() || !j.contains("cause") || !j["cause"].is_string()) return std::nullopt;
  return j["cause"].get<std::string>();
}

// The bug flag a report stems from.
std::optional<BugFlag> flag_of(const BugReport& r) {
  if (r.key.bug_class == BugClass::kAuthzScopeBypass) return BugFlag::kB8;
  if (r.key.bug_class == BugClass::kStatusMappingViolation) return BugFlag::kB7;
  if (r.key.bug_class != BugClass::kUnhandledError500) return std::nullopt;
  const auto cause = body_cause(r);
  for (int f = 1; f <= 6; ++f) {
    if (cause && *cause == panic_cause(static_cast<BugFlag>(f))) return static_cast<BugFlag>(f);
  }
  return std::nullopt;
}

Outcome rediscovery(const CampaignRun& run, double seconds) {
  std::set<std::string> causes;
  int status_mapping = 0, authz = 0;
  for (const auto& r : run.reports) {
    if (r.key.bug_class == BugClass::kUnhandledError500) {
      if (auto c = body_cause(r)) causes.insert(*c);
    }
    if (r.key.bug_class == BugClass::kStatusMappingViolation && r.key.status == 500) {
      ++status_mapping;
    }
    if (r.key.bug_class == BugClass::kAuthzScopeBypass) ++authz;
  }
  std::set<std::string> expected;
  for (int f = 1; f <= 6; ++f) expected.insert(panic_cause(static_cast<BugFlag>(f)));
  bool declared_404 = false;
  for (const auto& r : run.reports) {
    if (r.key.bug_class == BugClass::kStatusMappingViolation && r.first.finding &&
        r.first.finding->kind == "status-mapping") {
      declared_404 = true;
    }
  }
  std::ostringstream d;
  d << run.summary.requests_sent << " requests, " << run.reports.size() << " buckets, "
    << causes.size() << " distinct panic fingerprints, " << status_mapping
    << " status-mapping, " << authz << " authz, " << std::fixed << std::setprecision(1) << seconds << "s";
  const bool ok = std::includes(causes.begin(), causes.end(), expected.begin(), expected.end()) &&
                  status_mapping >= 1 && declared_404 && authz >= 1 &&
                  run.summary.requests_sent <= 50000 && seconds < 600;
  return {ok, d.str()};
}

Outcome zero_false_positives(const CampaignRun& run) {
  int bad = 0;
  for (const auto& r : run.reports) {
    if (r.key.bug_class == BugClass::kUnhandledError500 ||
        r.key.bug_class == BugClass::kAuthzScopeBypass) {
      ++bad;
    }
  }
  std::ostringstream d;
  d << run.summary.requests_sent << " requests, " << bad << " UnhandledError500/AuthzScopeBypass reports";
  return {bad == 0 && run.summary.requests_sent > 0, d.str()};
}

int discovery_status(VerifierMode mode, const std::set<BugFlag>& bugs) {
  auto bed = start_testbed(bugs, mode);
  HttpTransport transport;
  TokenRequest req{"8f3c2a10-0000-4000-8000-000000000005", "SMF", "UDR", "nudr-dr", {}, {}};
  const auto token = acquire_token(bed->token_endpoint(), req, transport);
  const auto res = http_get(bed->base_url("nrf") +
                                "/nnrf-disc/v1/nf-instances?target-nf-type=SMF&requester-nf-type=AMF",
                            token.compact);
  bed->shutdown();
  return res.status;
}

Outcome cross_service_attack() {
  const int shadow = discovery_status(VerifierMode::kSeededScopeShadow, {BugFlag::kB8});
  const int correct = discovery_status(VerifierMode::kCorrect, {});
  std::ostringstream d;
  d << "nudr-dr token on discovery: SEEDED_SCOPE_SHADOW " << shadow << ", CORRECT " << correct;
  return {shadow >= 200 && shadow <= 299 && correct == 403, d.str()};
}

void collect_refs(const Json& node, std::vector<std::string>& out) {
  if (node.is_object()) {
    for (const auto& [k, v] : node.items()) {
      if (k == "$ref" && v.is_string()) out.push_back(v.get<std::string>());
      collect_refs(v, out);
    }
  } else if (node.is_array()) {
    for (const auto& v : node) collect_refs(v, out);
  }
}

Outcome bundling_fidelity() {
  const auto dir = scratch_dir("bundle");
  std::size_t external = 0, dangling = 0, files = 0;
  std::string feature_ref;
  for (const auto& p : corpus_specs()) {
    const auto path = write_bundle(load_resolved(p, {fixtures() / "common"}), dir);
    ++files;
    // Re-read from disk so the check sees what a consumer of the bundle sees.
    const auto doc = load_document(path).document;
    std::vector<std::string> refs;
    collect_refs(doc, refs);
    for (const auto& r : refs) {
      if (r.empty() || r[0] != '#') {
        ++external;
        continue;
      }
      if (!doc.contains(Json::json_pointer(r.substr(1)))) ++dangling;
    }
    if (p.filename() == "nudm_sdm.yaml") {
      for (const auto& param : doc["paths"]["/shared-data"]["get"]["parameters"]) {
        if (param.value("name", "") == "supported-features") {
          feature_ref = param["schema"].value("$ref", "");
        }
      }
      if (!doc.contains(Json::json_pointer("/components/schemas/SupportedFeature"))) feature_ref += "(missing)";
    }
  }
  std::ostringstream d;
  d << files << " specs, " << external << " external refs, " << dangling
    << " dangling refs, supported-features -> " << feature_ref;
  return {files >= 4 && external == 0 && dangling == 0 &&
              feature_ref == "#/components/schemas/SupportedFeature",
          d.str()};
}

std::string flip_bit(const std::string& segment, std::size_t bit) {
  auto bytes = *base64url_decode(segment);
  bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
  return base64url_encode(bytes);
}

bool rejected(const VerificationResult& r) { return !r.accepted; }

Outcome token_properties() {
  std::mt19937_64 rng(20260101);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const std::vector<std::string> services = {"nudm-sdm", "nnrf-disc", "nudr-dr", "nnssf-nssaiavailability",
                                             "npcf-bdtpolicycontrol"};
  const std::vector<Snssai> slices = {{1, "010203"}, {1, "112233"}, {2, std::nullopt}, {3, "abcdef"}};
  const Key key = key_from_string(test_secret());
  const Key other = key_from_string(test_secret() + "x");
  const VerifierMode modes[] = {VerifierMode::kCorrect, VerifierMode::kFree5gcMinimal,
                                VerifierMode::kSeededScopeShadow};
  std::size_t matching_rejected = 0, tamper_accepted = 0, monotonic_broken = 0, tampers = 0;

  for (int i = 0; i < 1000; ++i) {
    TokenRequest req;
    req.consumer_instance_id = "consumer-" + std::to_string(rng());
    req.consumer_nf_type = std::string(kKnownNfTypes[pick(std::size(kKnownNfTypes))]);
    req.target_nf_type = std::string(kKnownNfTypes[pick(std::size(kKnownNfTypes))]);
    std::string scope = services[pick(services.size())];
    if (pick(3) == 0) scope += " " + services[pick(services.size())];
    req.requested_scope = scope;
    if (pick(2)) req.target_snssai_list = std::vector<Snssai>{slices[pick(slices.size())]};
    const auto completeness = pick(4) == 0 ? ClaimCompleteness::kFree5gcPartial : ClaimCompleteness::kFull;
    const std::int64_t now = 1700000000 + static_cast<std::int64_t>(pick(100000000));
    const std::int64_t ttl = 1 + static_cast<std::int64_t>(pick(7200));
    const auto token = mint_token(req, "nrf-instance", key, ttl, completeness, now);
    const auto scopes = token.claims.scopes();

    // Matching: in scope, right NF type, overlapping slices, unexpired.
    ProducerIdentity self{req.target_nf_type, "producer-1", {}, {}};
    self.served_snssais = req.target_snssai_list ? *req.target_snssai_list : std::vector<Snssai>{slices[0]};
    const auto& service = scopes[pick(scopes.size())];
    if (rejected(verify_token(token.compact, service, self, key, now + pick(static_cast<std::size_t>(ttl)),
                              VerifierMode::kCorrect))) {
      ++matching_rejected;
    }

    // Monotonicity over a random probe: other service, identity, clock, key.
    ProducerIdentity probe_self{std::string(kKnownNfTypes[pick(std::size(kKnownNfTypes))]), "producer-2",
                                {slices[pick(slices.size())]}, {}};
    const auto& probe_service = services[pick(services.size())];
    const auto probe_now = now + static_cast<std::int64_t>(pick(static_cast<std::size_t>(2 * ttl)));
    const auto& probe_key = pick(10) == 0 ? other : key;
    const auto correct = verify_token(token.compact, probe_service, probe_self, probe_key, probe_now,
                                      VerifierMode::kCorrect);
    const auto minimal = verify_token(token.compact, probe_service, probe_self, probe_key, probe_now,
                                      VerifierMode::kFree5gcMinimal);
    const auto shadow = verify_token(token.compact, probe_service, probe_self, probe_key, probe_now,
                                     VerifierMode::kSeededScopeShadow);
    const bool shadow_scope = shadow.failure_cause == FailureCause::kScopeMismatch;
    if ((rejected(minimal) && !rejected(correct)) || (rejected(shadow) && !rejected(minimal)) ||
        shadow_scope) {
      ++monotonic_broken;
    }

    // Every single-bit flip of the decoded header, payload and signature.
    const auto parts = split(token.compact, '.');
    for (std::size_t seg = 0; seg < 3; ++seg) {
      const std::size_t bits = base64url_decode(parts[seg])->size() * 8;
      for (std::size_t b = 0; b < bits; ++b) {
        auto tampered = parts;
        tampered[seg] = flip_bit(parts[seg], b);
        const auto compact = tampered[0] + "." + tampered[1] + "." + tampered[2];
        ++tampers;
        for (auto mode : modes) {
          if (!rejected(verify_token(compact, service, self, key, now, mode))) ++tamper_accepted;
        }
      }
    }
  }
  std::ostringstream d;
  d << "1000 samples, " << tampers << " bit flips x 3 modes: " << matching_rejected
    << " matching rejected, " << tamper_accepted << " tampers accepted, " << monotonic_broken
    << " monotonicity violations";
  return {matching_rejected == 0 && tamper_accepted == 0 && monotonic_broken == 0, d.str()};
}

Outcome determinism(const CampaignRun& a, const CampaignRun& b) {
  const auto log_a = read_file(a.out / "exchanges.ndjson");
  const auto log_b = read_file(b.out / "exchanges.ndjson");
  std::ostringstream d;
  d << "logs " << log_a.size() << " / " << log_b.size() << " bytes, "
    << (log_a == log_b ? "identical" : "differ") << "; bucket keys " << a.summary.bucket_keys.size()
    << " / " << b.summary.bucket_keys.size() << ", "
    << (a.summary.bucket_keys == b.summary.bucket_keys ? "identical" : "differ");
  return {!log_a.empty() && log_a == log_b && a.summary.bucket_keys == b.summary.bucket_keys, d.str()};
}

std::string bucket_dir(const BugReport& r) { return r.key.dir_name(); }

Outcome replays(const CampaignRun& run) {
  // One report per flag, first in bucket order.
  std::map<BugFlag, const BugReport*> chosen;
  for (const auto& r : run.reports) {
    if (auto f = flag_of(r); f && !chosen.count(*f)) chosen[*f] = &r;
  }
  int ok = 0;
  std::ostringstream failures;
  for (int i = 1; i <= 8; ++i) {
    const auto flag = static_cast<BugFlag>(i);
    auto it = chosen.find(flag);
    if (it == chosen.end()) {
      failures << " " << bug_flag_name(flag) << ":no-report";
      continue;
    }
    const auto file = run.out / bucket_dir(*it->second) / "replay.json";
    auto attempt = [&](bool on) {
      const auto mode = on && flag == BugFlag::kB8 ? VerifierMode::kSeededScopeShadow : VerifierMode::kCorrect;
      auto bed = start_testbed(on ? std::set<BugFlag>{flag} : std::set<BugFlag>{}, mode);
      ReplayOptions options;
      options.origins = origins_from(bed->host_map());
      options.token_endpoint = bed->token_endpoint();
      auto outcome = replay_file(file, options);
      bed->shutdown();
      return outcome;
    };
    const auto on = attempt(true);
    const auto off = attempt(false);
    const bool good = on.reproduced && on.observed_class == it->second->key.bug_class && !off.reproduced &&
                      off.message.rfind("not reproduced", 0) == 0;
    if (good) {
      ++ok;
    } else {
      failures << " " << bug_flag_name(flag) << ":[on: " << on.message << "; off: " << off.message << "]";
    }
  }
  std::ostringstream d;
  d << ok << "/8 reports reproduce with the flag on and not with it off" << failures.str();
  return {ok == 8, d.str()};
}

// Edge set derived straight from the raw document: every (response field or
// Location convention, path slot) pair across distinct operations.
std::set<std::tuple<std::string, std::string, std::string>> oracle_edges(const Json& doc) {
  auto strip = [](std::string s) {
    std::string o;
    for (char c : s) {
      if (c != '-' && c != '_') o.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (o.size() > 2 && o.substr(o.size() - 2) == "id") return o.substr(0, o.size() - 2);
    if (o.size() > 3 && o.substr(o.size() - 3) == "ref") return o.substr(0, o.size() - 3);
    return o;
  };
  auto deref = [&](const Json& s) -> Json {
    if (s.contains("$ref")) return doc.at(Json::json_pointer(s["$ref"].get<std::string>().substr(1)));
    return s;
  };
  const auto base = parse_url(doc["servers"][0]["url"].get<std::string>())->path;

  struct Op {
    std::string id, path;
    std::vector<std::string> fields, slots;
    bool location = false;
  };
  std::vector<Op> ops;
  for (const auto& [path, item] : doc["paths"].items()) {
    for (const auto& [method, op] : item.items()) {
      Op o{to_upper(method) + " " + base + path, base + path, {}, {}, false};
      for (const auto& p : op.value("parameters", Json::array())) {
        if (p["in"] == "path") o.slots.push_back(p["name"].get<std::string>());
      }
      for (const auto& [code, resp] : op["responses"].items()) {
        if (code.size() != 3 || code[0] != '2') continue;
        if (resp.contains("headers") && resp["headers"].contains("Location")) o.location = true;
        if (!resp.contains("content")) continue;
        for (const auto& [media, content] : resp["content"].items()) {
          const auto schema = deref(content["schema"]);
          const auto props = schema.value("properties", Json::object());
          for (const auto& [name, _] : props.items()) o.fields.push_back(name);
        }
      }
      ops.push_back(o);
    }
  }
  std::set<std::tuple<std::string, std::string, std::string>> edges;
  for (const auto& p : ops) {
    for (const auto& c : ops) {
      if (p.id == c.id) continue;
      for (const auto& slot : c.slots) {
        for (const auto& f : p.fields) {
          if (strip(f) == strip(slot)) edges.emplace(p.id, c.id, slot);
        }
        if (p.location && c.path == p.path + "/{" + slot + "}") edges.emplace(p.id, c.id, slot);
      }
    }
  }
  return edges;
}

Outcome dependency_oracle() {
  const auto path = fixtures() / "deps" / "subscriptions.yaml";
  const auto spec = load_resolved(path);
  const auto oracle = oracle_edges(load_document(path).document);
  std::set<std::tuple<std::string, std::string, std::string>> inferred;
  for (const auto& e : infer_dependencies(compile(spec)).edges) inferred.emplace(e.producer, e.consumer, e.handle);
  std::ostringstream d;
  d << "oracle " << oracle.size() << " edges, inferred " << inferred.size() << " edges, "
    << (oracle == inferred ? "equal" : "different");
  return {oracle == inferred && !oracle.empty(), d.str()};
}

int failures = 0;

void report(int n, const std::string& name, const std::function<Outcome()>& fn) {
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " " << n << " " << name << ": " << o.detail << std::endl;
}

}  // namespace

int main() {
  const std::set<BugFlag> all = parse_bug_flags("all");
  std::optional<CampaignRun> seeded_a, seeded_b, clean;
  double seeded_seconds = 0;
  std::string campaign_error;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    seeded_a = run_on_fresh_testbed(all, VerifierMode::kSeededScopeShadow, "seeded-a");
    seeded_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    seeded_b = run_on_fresh_testbed(all, VerifierMode::kSeededScopeShadow, "seeded-b");
    clean = run_on_fresh_testbed({}, VerifierMode::kCorrect, "clean");
  } catch (const std::exception& e) {
    campaign_error = e.what();
  }
  auto need = [&](const std::optional<CampaignRun>& run) {
    if (!run) throw std::runtime_error("campaign failed: " + campaign_error);
    return *run;
  };

  report(1, "rediscovery", [&] { return rediscovery(need(seeded_a), seeded_seconds); });
  report(2, "zero false positives", [&] { return zero_false_positives(need(clean)); });
  report(3, "cross-service attack", cross_service_attack);
  report(4, "bundling fidelity", bundling_fidelity);
  report(5, "token properties", token_properties);
  report(6, "determinism", [&] { return determinism(need(seeded_a), need(seeded_b)); });
  report(7, "replay", [&] { return replays(need(seeded_a)); });
  report(8, "dependency oracle", dependency_oracle);
  for (const auto* run : {&seeded_a, &seeded_b, &clean}) {
    if (*run) fs::remove_all((*run)->out.parent_path());
  }
  return failures == 0 ? 0 : 1;
}
