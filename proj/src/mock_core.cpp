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

#include "sbifuzz/mock_core.hpp"

#include <sys/socket.h>

#include <atomic>
#include <cstdio>
#include <mutex>
#include <random>
#include <regex>
#include <thread>

#include "httplib.h"
#include "sbifuzz/error.hpp"

namespace sbifuzz {

std::string bug_flag_name(BugFlag flag) { return "B" + std::to_string(static_cast<int>(flag)); }

std::optional<BugFlag> parse_bug_flag(std::string_view text) {
  const auto t = to_upper(trim(text));
  if (t.size() != 2 || t[0] != 'B' || t[1] < '1' || t[1] > '8') return std::nullopt;
  return static_cast<BugFlag>(t[1] - '0');
}

std::set<BugFlag> parse_bug_flags(std::string_view text) {
  std::set<BugFlag> out;
  const auto t = to_lower(trim(text));
  if (t.empty() || t == "none") return out;
  if (t == "all") {
    for (int i = 1; i <= 8; ++i) out.insert(static_cast<BugFlag>(i));
    return out;
  }
  for (const auto& part : split(text, ',')) {
    if (trim(part).empty()) continue;
    auto f = parse_bug_flag(part);
    if (!f) throw Error(Errc::kConfigError, "unknown bug flag '" + part + "'");
    out.insert(*f);
  }
  return out;
}

std::string panic_cause(BugFlag flag) {
  switch (flag) {
    case BugFlag::kB1: return "RUNTIME_PANIC:index-oob";
    case BugFlag::kB2: return "RUNTIME_PANIC:unmarshal-nil";
    case BugFlag::kB3: return "RUNTIME_PANIC:unmarshal-bad";
    case BugFlag::kB4: return "RUNTIME_PANIC:invalid-param";
    case BugFlag::kB5: return "RUNTIME_PANIC:nil-deref";
    case BugFlag::kB6: return "RUNTIME_PANIC:type-assert";
    case BugFlag::kB7: return "SYSTEM_FAILURE";
    case BugFlag::kB8: return "";
  }
  return "";
}

SeedData SeedData::defaults() {
  SeedData s;
  s.supis = {"imsi-208930000000003", "imsi-208930000000004"};
  s.ue_ids = {{"msisdn-886900000001", "imsi-208930000000003"},
              {"msisdn-886900000002", "imsi-208930000000004"}};
  s.shared_data = {Json{{"sharedDataId", "20893-sd0001"},
                        {"sharedSmSubsData",
                         {{"singleNssaiSpecificDnnConfig",
                           {{"dnn", "internet"}, {"sst", 1}, {"sd", "010203"}}}}}}};
  s.served_snssais = {Snssai{1, "010203"}, Snssai{1, "112233"}};
  return s;
}

SeedData SeedData::from_json(const Json& j) {
  SeedData s;
  s.supis = j.at("supis").get<std::vector<std::string>>();
  for (const auto& [k, v] : j.at("ue_ids").items()) s.ue_ids[k] = v.get<std::string>();
  for (const auto& r : j.at("shared_data")) s.shared_data.push_back(r);
  for (const auto& n : j.at("served_snssais")) s.served_snssais.push_back(Snssai::from_json(n));
  return s;
}

Json SeedData::to_json() const {
  Json ue = Json::object();
  for (const auto& [k, v] : ue_ids) ue[k] = v;
  Json sn = Json::array();
  for (const auto& s : served_snssais) sn.push_back(s.to_json());
  return Json{{"supis", supis}, {"ue_ids", ue}, {"shared_data", shared_data}, {"served_snssais", sn}};
}

void TestbedConfig::use_base_port(int base) {
  int i = 0;
  for (auto nf : kNfNames) ports[std::string(nf)] = base + i++;
}

VerifierMode TestbedConfig::mode_for(const std::string& nf) const {
  if (has(BugFlag::kB8)) return VerifierMode::kSeededScopeShadow;
  if (auto it = verifier_overrides.find(nf); it != verifier_overrides.end()) return it->second;
  return verifier_mode;
}

namespace {

constexpr const char* kUdmBase = "/nudm-sdm/v2";
constexpr const char* kNssfBase = "/nnssf-nssaiavailability/v1";
constexpr const char* kPcfBase = "/npcf-bdtpolicycontrol/v1";
constexpr const char* kDiscBase = "/nnrf-disc/v1";

void send_json(httplib::Response& res, int status, const Json& body,
               const char* type = "application/json") {
  res.status = status;
  res.set_content(body.dump(), type);
}

void problem(httplib::Response& res, int status, const std::string& title,
             const std::string& detail, const std::string& cause = "") {
  Json p{{"title", title}, {"status", status}, {"detail", detail}};
  if (!cause.empty()) p["cause"] = cause;
  send_json(res, status, p, "application/problem+json");
}

void bad_request(httplib::Response& res, const std::string& detail) {
  problem(res, 400, "Bad Request", detail, "MANDATORY_IE_INCORRECT");
}

std::optional<Json> parse_object(const std::string& body) {
  auto j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

bool is_string_member(const Json& o, const char* key) {
  return o.contains(key) && o.at(key).is_string();
}

bool valid_snssai(const Json& j) {
  return j.is_object() && j.contains("sst") && j.at("sst").is_number_integer() &&
         (!j.contains("sd") || j.at("sd").is_string());
}

bool valid_tai(const Json& j) {
  if (!j.is_object() || !is_string_member(j, "tac") || !j.contains("plmnId")) return false;
  const auto& p = j.at("plmnId");
  return p.is_object() && is_string_member(p, "mcc") && is_string_member(p, "mnc");
}

bool valid_datetime_member(const Json& o, const char* key) {
  return is_string_member(o, key) && is_rfc3339(o.at(key).get<std::string>());
}

}  // namespace

struct Testbed::Impl {
  TestbedConfig config;
  std::map<std::string, std::unique_ptr<httplib::Server>> servers;
  std::map<std::string, int> bound_ports;
  std::map<std::string, std::string> instance_ids;
  std::vector<std::thread> threads;
  std::atomic<bool> stopped{false};

  std::mutex nrf_mu, udm_mu, nssf_mu, pcf_mu;
  std::mt19937_64 id_rng{std::random_device{}()};
  std::map<std::string, std::uint64_t> counters;
  std::mutex id_mu;
  std::map<std::string, Json> udm_subscriptions;
  std::map<std::string, Json> nssf_subscriptions;
  std::map<std::string, Json> pcf_policies;
  std::set<std::string> crashed_routes;
  std::mutex crash_mu;

  std::int64_t now() const {
    if (config.clock) return config.clock();
    if (config.deterministic) return TestbedConfig::kFrozenNow;
    return system_now();
  }

  std::string next_id(const std::string& kind) {
    std::lock_guard lock(id_mu);
    if (config.deterministic) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%08llu",
                    static_cast<unsigned long long>(++counters[kind]));
      return kind + "-" + buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng()));
    return kind + "-" + buf;
  }

  ProducerIdentity identity(const std::string& nf) const {
    return ProducerIdentity{to_upper(nf), instance_ids.at(nf), config.seed.served_snssais, {}};
  }

  // Simulated panic: 500 with a fingerprinted cause; with crash_hard the
  // route stays down afterwards.
  void panic(httplib::Response& res, BugFlag flag, const std::string& route) {
    if (config.crash_hard) {
      std::lock_guard lock(crash_mu);
      crashed_routes.insert(route);
    }
    problem(res, 500, "Internal Server Error", "unhandled runtime error", panic_cause(flag));
  }

  bool crashed(httplib::Response& res, const std::string& route) {
    std::lock_guard lock(crash_mu);
    if (!crashed_routes.count(route)) return false;
    problem(res, 503, "Service Unavailable", "route down after panic");
    return true;
  }

  // Token check shared by every producer route. Returns false after writing
  // the rejection.
  bool authorize(const httplib::Request& req, httplib::Response& res, const std::string& nf,
                 const std::string& service) {
    const auto header = req.get_header_value("Authorization");
    if (!starts_with(header, "Bearer ")) {
      res.set_header("WWW-Authenticate", "Bearer");
      problem(res, 401, "Unauthorized", "missing bearer token");
      return false;
    }
    const auto result = verify_token(std::string_view(header).substr(7), service, identity(nf),
                                     config.key, now(), config.mode_for(nf));
    if (result.accepted) return true;
    const auto cause = *result.failure_cause;
    const std::string name(failure_cause_name(cause));
    if (cause == FailureCause::kMalformed || cause == FailureCause::kBadSignature ||
        cause == FailureCause::kExpired) {
      res.set_header("WWW-Authenticate", "Bearer error=\"invalid_token\"");
      problem(res, 401, "Unauthorized", "token rejected: " + name);
    } else {
      res.set_header("WWW-Authenticate", "Bearer error=\"insufficient_scope\"");
      problem(res, 403, "Forbidden", "token rejected: " + name);
    }
    return false;
  }

  std::string location(const std::string& nf, const std::string& path) const {
    return "http://" + config.bind_host + ":" + std::to_string(bound_ports.at(nf)) + path;
  }

  void install_health(httplib::Server& s) {
    s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, Json{{"status", "ok"}});
    });
  }

  void install_nrf(httplib::Server& s) {
    install_health(s);
    s.Post("/oauth2/token", [this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> form;
      for (auto& [k, v] : form_decode(req.body)) form.emplace(k, v);
      auto field = [&](const char* k) -> std::string {
        auto it = form.find(k);
        return it == form.end() ? "" : it->second;
      };
      auto token_error = [&](const std::string& error, const std::string& text) {
        send_json(res, 400, Json{{"error", error}, {"error_description", text}});
      };
      if (!form.count("grant_type")) return token_error("invalid_request", "grant_type missing");
      if (field("grant_type") != "client_credentials") {
        return token_error("unsupported_grant_type", "only client_credentials is served");
      }
      if (field("nfInstanceId").empty()) return token_error("invalid_request", "nfInstanceId missing");
      if (trim(field("scope")).empty()) return token_error("invalid_scope", "scope missing");

      TokenRequest tr;
      tr.consumer_instance_id = field("nfInstanceId");
      tr.consumer_nf_type = field("nfType");
      tr.target_nf_type = field("targetNfType");
      tr.requested_scope = field("scope");
      try {
        if (form.count("targetSnssaiList")) {
          std::vector<Snssai> list;
          for (const auto& n : Json::parse(field("targetSnssaiList"))) list.push_back(Snssai::from_json(n));
          tr.target_snssai_list = std::move(list);
        }
        if (form.count("targetNsiList")) {
          tr.target_nsi_list = Json::parse(field("targetNsiList")).get<std::vector<std::string>>();
        }
      } catch (const std::exception&) {
        return token_error("invalid_request", "slice parameters malformed");
      }

      SignedToken token;
      {
        std::lock_guard lock(nrf_mu);
        try {
          token = mint_token(tr, instance_ids.at("nrf"), config.key, config.token_ttl,
                             config.claim_mode, now());
        } catch (const Error& e) {
          return token_error("invalid_request", e.what());
        }
      }
      send_json(res, 200, Json{{"access_token", token.compact},
                               {"token_type", "Bearer"},
                               {"expires_in", config.token_ttl},
                               {"scope", tr.requested_scope}});
    });

    s.Get(std::string(kDiscBase) + "/nf-instances",
          [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorize(req, res, "nrf", "nnrf-disc")) return;
            auto known = [](const std::string& t) { return is_known_nf_type(t); };
            if (!req.has_param("target-nf-type") || !known(req.get_param_value("target-nf-type"))) {
              return bad_request(res, "target-nf-type missing or invalid");
            }
            if (!req.has_param("requester-nf-type") ||
                !known(req.get_param_value("requester-nf-type"))) {
              return bad_request(res, "requester-nf-type missing or invalid");
            }
            if (req.has_param("requester-nf-instance-id") &&
                !is_uuid(req.get_param_value("requester-nf-instance-id"))) {
              return bad_request(res, "requester-nf-instance-id is not a uuid");
            }
            std::size_t limit = SIZE_MAX;
            if (req.has_param("limit")) {
              const auto text = req.get_param_value("limit");
              static const std::regex kPositive("^[1-9][0-9]{0,8}$");
              if (!std::regex_match(text, kPositive)) return bad_request(res, "limit invalid");
              limit = std::stoul(text);
            }
            const auto target = req.get_param_value("target-nf-type");
            Json instances = Json::array();
            for (const auto& [nf, id] : instance_ids) {
              if (to_upper(nf) != target || instances.size() >= limit) continue;
              instances.push_back(profile(to_upper(nf), id, nf));
            }
            send_json(res, 200, Json{{"validityPeriod", 3600}, {"nfInstances", instances}});
          });
  }

  Json profile(const std::string& type, const std::string& id, const std::string& nf) const {
    Json sn = Json::array();
    for (const auto& s : config.seed.served_snssais) sn.push_back(s.to_json());
    Json p{{"nfInstanceId", id}, {"nfType", type}, {"nfStatus", "REGISTERED"}, {"sNssais", sn}};
    if (type == "SMF") {
      p["ipv4Addresses"] = Json::array({"10.100.200.6"});
      p["smfInfo"] = Json{{"sNssaiSmfInfoList",
                           Json::array({Json{{"sNssai", {{"sst", 1}, {"sd", "010203"}}},
                                             {"dnnSmfInfoList", Json::array({{{"dnn", "internet"}}})}}})}};
    } else if (bound_ports.count(nf)) {
      p["ipv4Addresses"] = Json::array({config.bind_host});
    }
    return p;
  }

  void install_udm(httplib::Server& s) {
    install_health(s);
    const std::string base = kUdmBase;

    s.Get(base + "/shared-data", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string route = "GET shared-data";
      if (crashed(res, route) || !authorize(req, res, "udm", "nudm-sdm")) return;
      if (!req.has_param("supported-features") && config.has(BugFlag::kB1)) {
        return panic(res, BugFlag::kB1, route);
      }
      std::set<std::string> wanted;
      bool filter = false;
      if (req.has_param("shared-data-ids")) {
        filter = true;
        for (std::size_t i = 0; i < req.get_param_value_count("shared-data-ids"); ++i) {
          for (const auto& id : split(req.get_param_value("shared-data-ids", i), ',')) {
            if (id.empty()) return bad_request(res, "shared-data-ids contains an empty id");
            wanted.insert(id);
          }
        }
      }
      Json out = Json::array();
      for (const auto& rec : config.seed.shared_data) {
        if (!filter || wanted.count(rec.value("sharedDataId", ""))) out.push_back(rec);
      }
      if (filter && out.empty()) return problem(res, 404, "Not Found", "no shared data matched", "DATA_NOT_FOUND");
      send_json(res, 200, out);
    });

    s.Get(base + R"(/([^/]+)/sm-data)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string route = "GET sm-data";
      if (crashed(res, route) || !authorize(req, res, "udm", "nudm-sdm")) return;
      std::optional<Json> nssai;
      if (!req.has_param("single-nssai")) {
        if (config.has(BugFlag::kB2)) return panic(res, BugFlag::kB2, route);
      } else {
        auto parsed = Json::parse(req.get_param_value("single-nssai"), nullptr, false);
        if (parsed.is_discarded() || !valid_snssai(parsed)) {
          if (config.has(BugFlag::kB3)) return panic(res, BugFlag::kB3, route);
          return bad_request(res, "single-nssai is not a valid Snssai");
        }
        nssai = std::move(parsed);
      }
      const std::string supi = req.matches[1];
      const auto& supis = config.seed.supis;
      if (std::find(supis.begin(), supis.end(), supi) == supis.end()) {
        return problem(res, 404, "Not Found", "subscriber unknown", "USER_NOT_FOUND");
      }
      Json out = Json::array();
      for (const auto& sn : config.seed.served_snssais) {
        if (nssai && (nssai->at("sst") != sn.sst ||
                      (nssai->contains("sd") && (!sn.sd || nssai->at("sd") != *sn.sd)))) {
          continue;
        }
        Json dnn = Json::object();
        const std::string name = req.has_param("dnn") ? req.get_param_value("dnn") : "internet";
        dnn[name] = Json{{"pduSessionTypes", {{"defaultSessionType", "IPV4"}}}};
        out.push_back(Json{{"singleNssai", sn.to_json()}, {"dnnConfigurations", dnn}});
      }
      send_json(res, 200, out);
    });

    s.Get(base + R"(/([^/]+)/id-translation-result)",
          [this](const httplib::Request& req, httplib::Response& res) {
            const std::string route = "GET id-translation-result";
            if (crashed(res, route) || !authorize(req, res, "udm", "nudm-sdm")) return;
            const std::string ue = req.matches[1];
            auto it = config.seed.ue_ids.find(ue);
            if (it == config.seed.ue_ids.end()) {
              // The UDR answered 404; the seeded variant loses it.
              if (config.has(BugFlag::kB7)) {
                return problem(res, 500, "Internal Server Error", "UDR query failed",
                               panic_cause(BugFlag::kB7));
              }
              return problem(res, 404, "Not Found", "ueId unknown", "USER_NOT_FOUND");
            }
            send_json(res, 200, Json{{"supi", it->second}, {"gpsi", it->first}});
          });

    s.Post(base + "/shared-data-subscriptions", [this, base](const httplib::Request& req,
                                                             httplib::Response& res) {
      const std::string route = "POST shared-data-subscriptions";
      if (crashed(res, route) || !authorize(req, res, "udm", "nudm-sdm")) return;
      auto body = parse_object(req.body);
      if (!body) return bad_request(res, "body is not a JSON object");
      const auto& b = *body;
      if (!is_string_member(b, "nfInstanceId") || !is_string_member(b, "callbackReference") ||
          !b.contains("monitoredResourceUris") || !b.at("monitoredResourceUris").is_array() ||
          b.at("monitoredResourceUris").empty()) {
        return bad_request(res, "mandatory member missing or mistyped");
      }
      for (const auto& u : b.at("monitoredResourceUris")) {
        if (!u.is_string()) return bad_request(res, "monitoredResourceUris entry mistyped");
      }
      if (b.contains("implicitUnsubscribe") && !b.at("implicitUnsubscribe").is_boolean()) {
        return bad_request(res, "implicitUnsubscribe mistyped");
      }
      if (b.contains("expires") && !valid_datetime_member(b, "expires")) {
        return bad_request(res, "expires is not a date-time");
      }
      bool semantic_ok = is_uuid(b.at("nfInstanceId").get<std::string>()) &&
                         is_absolute_uri(b.at("callbackReference").get<std::string>());
      for (const auto& u : b.at("monitoredResourceUris")) {
        semantic_ok = semantic_ok && is_absolute_uri(u.get<std::string>());
      }
      if (!semantic_ok) {
        if (config.has(BugFlag::kB4)) return panic(res, BugFlag::kB4, route);
        return bad_request(res, "invalid nfInstanceId or URI");
      }
      Json created = b;
      const auto id = next_id("sdm-sub");
      created["subscriptionId"] = id;
      {
        std::lock_guard lock(udm_mu);
        udm_subscriptions[id] = created;
      }
      res.set_header("Location", location("udm", base + "/shared-data-subscriptions/" + id));
      send_json(res, 201, created);
    });

    s.Delete(base + R"(/shared-data-subscriptions/([^/]+))",
             [this](const httplib::Request& req, httplib::Response& res) {
               const std::string route = "DELETE shared-data-subscriptions";
               if (crashed(res, route) || !authorize(req, res, "udm", "nudm-sdm")) return;
               std::lock_guard lock(udm_mu);
               if (!udm_subscriptions.erase(req.matches[1])) {
                 return problem(res, 404, "Not Found", "subscription unknown", "SUBSCRIPTION_NOT_FOUND");
               }
               res.status = 204;
             });
  }

  void install_nssf(httplib::Server& s) {
    install_health(s);
    const std::string base = std::string(kNssfBase) + "/nssai-availability/subscriptions";

    s.Post(base, [this, base](const httplib::Request& req, httplib::Response& res) {
      const std::string route = "POST nssai-availability-subscriptions";
      if (crashed(res, route) || !authorize(req, res, "nssf", "nnssf-nssaiavailability")) return;
      auto body = parse_object(req.body);
      if (!body) return bad_request(res, "body is not a JSON object");
      const auto& b = *body;
      if (!is_string_member(b, "nfNssaiAvailabilityUri")) return bad_request(res, "nfNssaiAvailabilityUri");
      if (!b.contains("taiList") || !b.at("taiList").is_array() || b.at("taiList").empty()) {
        return bad_request(res, "taiList");
      }
      for (const auto& t : b.at("taiList")) {
        if (!valid_tai(t)) return bad_request(res, "taiList entry");
      }
      if (!is_string_member(b, "event") || b.at("event") != "SNSSAI_STATUS_CHANGE_REPORT") {
        return bad_request(res, "event");
      }
      if (b.contains("supportedFeatures") && !b.at("supportedFeatures").is_string()) {
        return bad_request(res, "supportedFeatures");
      }
      if (b.contains("expiry") && !valid_datetime_member(b, "expiry")) return bad_request(res, "expiry");
      if (!b.contains("expiry") && config.has(BugFlag::kB5)) return panic(res, BugFlag::kB5, route);

      const auto id = next_id("nssf-sub");
      Json created{{"subscriptionId", id}};
      if (b.contains("expiry")) created["expiry"] = b.at("expiry");
      {
        std::lock_guard lock(nssf_mu);
        nssf_subscriptions[id] = b;
      }
      res.set_header("Location", location("nssf", base + "/" + id));
      send_json(res, 201, created);
    });

    s.Delete(base + "/([^/]+)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string route = "DELETE nssai-availability-subscriptions";
      if (crashed(res, route) || !authorize(req, res, "nssf", "nnssf-nssaiavailability")) return;
      std::lock_guard lock(nssf_mu);
      if (!nssf_subscriptions.erase(req.matches[1])) {
        return problem(res, 404, "Not Found", "subscription unknown", "SUBSCRIPTION_NOT_FOUND");
      }
      res.status = 204;
    });
  }

  void install_pcf(httplib::Server& s) {
    install_health(s);
    const std::string base = std::string(kPcfBase) + "/bdtpolicies";

    s.Post(base, [this, base](const httplib::Request& req, httplib::Response& res) {
      const std::string route = "POST bdtpolicies";
      if (crashed(res, route) || !authorize(req, res, "pcf", "npcf-bdtpolicycontrol")) return;
      auto body = parse_object(req.body);
      if (!body) return bad_request(res, "body is not a JSON object");
      const auto& b = *body;
      if (!is_string_member(b, "aspId")) return bad_request(res, "aspId");
      if (!b.contains("desTimeInt") || !b.at("desTimeInt").is_object() ||
          !valid_datetime_member(b.at("desTimeInt"), "startTime") ||
          !valid_datetime_member(b.at("desTimeInt"), "stopTime")) {
        return bad_request(res, "desTimeInt");
      }
      if (!b.contains("numOfUes") || !b.at("numOfUes").is_number_integer()) return bad_request(res, "numOfUes");
      if (!b.contains("volPerUe") || !b.at("volPerUe").is_object()) return bad_request(res, "volPerUe");
      for (const char* k : {"duration", "totalVolume"}) {
        if (b.at("volPerUe").contains(k) && !b.at("volPerUe").at(k).is_number_integer()) {
          return bad_request(res, "volPerUe");
        }
      }
      if (b.contains("dnn") && !b.at("dnn").is_string()) return bad_request(res, "dnn");
      if (b.contains("snssai") && !valid_snssai(b.at("snssai"))) return bad_request(res, "snssai");
      if (config.has(BugFlag::kB6)) return panic(res, BugFlag::kB6, route);

      const auto id = next_id("bdt");
      Json policy{{"bdtPolData", {{"bdtRefId", id}, {"selTransPolicyId", 1}}}, {"bdtReqData", b}};
      {
        std::lock_guard lock(pcf_mu);
        pcf_policies[id] = policy;
      }
      res.set_header("Location", location("pcf", base + "/" + id));
      send_json(res, 201, policy);
    });

    s.Get(base + "/([^/]+)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string route = "GET bdtpolicies";
      if (crashed(res, route) || !authorize(req, res, "pcf", "npcf-bdtpolicycontrol")) return;
      std::lock_guard lock(pcf_mu);
      auto it = pcf_policies.find(req.matches[1]);
      if (it == pcf_policies.end()) return problem(res, 404, "Not Found", "policy unknown", "CONTEXT_NOT_FOUND");
      send_json(res, 200, it->second);
    });
  }
};

Testbed::Testbed(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

Testbed::~Testbed() { shutdown(); }

std::unique_ptr<Testbed> Testbed::start(TestbedConfig config) {
  if (config.key.size() < 32) throw Error(Errc::kWeakKey, "testbed key shorter than 32 bytes");
  auto impl = std::make_unique<Impl>();
  impl->config = std::move(config);

  const char* fixed_ids[][2] = {{"nrf", "8f3c2a10-0000-4000-8000-000000000001"},
                                {"udm", "8f3c2a10-0000-4000-8000-000000000002"},
                                {"nssf", "8f3c2a10-0000-4000-8000-000000000003"},
                                {"pcf", "8f3c2a10-0000-4000-8000-000000000004"},
                                {"smf", "8f3c2a10-0000-4000-8000-000000000005"}};
  for (auto& [nf, id] : fixed_ids) impl->instance_ids[nf] = id;

  Impl* self = impl.get();
  auto fail = [&](const std::string& msg) {
    for (auto& [nf, s] : self->servers) s->stop();
    for (auto& t : self->threads) t.join();
    throw Error(Errc::kBindError, msg);
  };

  for (auto nf_view : TestbedConfig::kNfNames) {
    const std::string nf(nf_view);
    auto server = std::make_unique<httplib::Server>();
    server->set_tcp_nodelay(true);
    // Plain SO_REUSEADDR so a second testbed on the same port fails to bind.
    server->set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    server->set_keep_alive_max_count(1000000);
    if (nf == "nrf") self->install_nrf(*server);
    if (nf == "udm") self->install_udm(*server);
    if (nf == "nssf") self->install_nssf(*server);
    if (nf == "pcf") self->install_pcf(*server);

    int port = 0;
    if (auto it = self->config.ports.find(nf); it != self->config.ports.end()) port = it->second;
    if (port > 0) {
      if (!server->bind_to_port(self->config.bind_host, port)) {
        self->servers[nf] = std::move(server);
        fail(nf + ": cannot bind " + self->config.bind_host + ":" + std::to_string(port));
      }
    } else {
      port = server->bind_to_any_port(self->config.bind_host);
      if (port <= 0) {
        self->servers[nf] = std::move(server);
        fail(nf + ": cannot bind an ephemeral port on " + self->config.bind_host);
      }
    }
    self->bound_ports[nf] = port;
    httplib::Server* raw = server.get();
    self->servers[nf] = std::move(server);
    self->threads.emplace_back([raw] { raw->listen_after_bind(); });
    raw->wait_until_ready();
  }
  return std::unique_ptr<Testbed>(new Testbed(std::move(impl)));
}

void Testbed::shutdown() {
  if (!impl_ || impl_->stopped.exchange(true)) return;
  for (auto& [nf, s] : impl_->servers) s->stop();
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
}

std::string Testbed::base_url(const std::string& nf) const {
  return "http://" + impl_->config.bind_host + ":" + std::to_string(port(nf));
}

int Testbed::port(const std::string& nf) const {
  auto it = impl_->bound_ports.find(nf);
  if (it == impl_->bound_ports.end()) throw Error(Errc::kUnknownService, "no NF named " + nf);
  return it->second;
}

HostMap Testbed::host_map() const {
  HostMap m;
  for (const auto& [nf, p] : impl_->bound_ports) {
    m.entries[nf] = impl_->config.bind_host + ":" + std::to_string(p);
  }
  return m;
}

const TestbedConfig& Testbed::config() const { return impl_->config; }

std::string Testbed::instance_id(const std::string& nf) const { return impl_->instance_ids.at(nf); }

}  // namespace sbifuzz
