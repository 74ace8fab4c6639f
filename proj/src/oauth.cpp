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

#include "sbifuzz/oauth.hpp"

#include <algorithm>
#include <chrono>
#include <regex>

#include "sbifuzz/error.hpp"

namespace sbifuzz {

namespace {

constexpr std::string_view kHeader = R"({"alg":"HS256","typ":"JWT"})";


std::string signing_input_signature(std::string_view signing_input,
                                    std::span<const std::uint8_t> key) {
  return base64url_encode(hmac_sha256(key, signing_input));
}

std::optional<Json> decode_segment(std::string_view segment) {
  auto raw = base64url_decode(segment);
  if (!raw) return std::nullopt;
  auto parsed = Json::parse(raw->begin(), raw->end(), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

bool slices_intersect(const std::vector<Snssai>& a, const std::vector<Snssai>& b) {
  for (const auto& x : a) {
    if (std::find(b.begin(), b.end(), x) != b.end()) return true;
  }
  return false;
}

}  // namespace

Key key_from_string(std::string_view secret) { return Key(secret.begin(), secret.end()); }

std::int64_t system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool Snssai::valid() const {
  static const std::regex kSd("^[0-9A-Fa-f]{6}$");
  return sst >= 0 && sst <= 255 && (!sd || std::regex_match(*sd, kSd));
}

Json Snssai::to_json() const {
  Json j{{"sst", sst}};
  if (sd) j["sd"] = *sd;
  return j;
}

Snssai Snssai::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("sst") || !j.at("sst").is_number_integer()) {
    throw Error(Errc::kMalformedTokenResponse, "snssai needs an integer sst");
  }
  Snssai s;
  s.sst = j.at("sst").get<int>();
  if (j.contains("sd")) {
    if (!j.at("sd").is_string()) throw Error(Errc::kMalformedTokenResponse, "sd must be a string");
    s.sd = j.at("sd").get<std::string>();
  }
  return s;
}

std::vector<std::string> AccessTokenClaims::scopes() const {
  std::vector<std::string> out;
  for (auto& s : split(scope, ' ')) {
    if (!s.empty()) out.push_back(s);
  }
  return out;
}

Json AccessTokenClaims::to_json() const {
  Json j = Json::object();
  if (issuer) j["iss"] = *issuer;
  j["sub"] = subject;
  if (audience) j["aud"] = *audience;
  j["scope"] = scope;
  j["exp"] = expiry;
  if (issued_at) j["iat"] = *issued_at;
  if (producer_snssai_list) {
    Json list = Json::array();
    for (const auto& s : *producer_snssai_list) list.push_back(s.to_json());
    j["producerSnssaiList"] = list;
  }
  if (producer_nsi_list) j["producerNsiList"] = *producer_nsi_list;
  return j;
}

AccessTokenClaims AccessTokenClaims::from_json(const Json& j) {
  auto fail = [](const std::string& what) {
    throw Error(Errc::kMalformedTokenResponse, "claims: " + what);
  };
  if (!j.is_object()) fail("not an object");
  auto opt_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) return std::nullopt;
    if (!j.at(key).is_string()) fail(std::string(key) + " not a string");
    return j.at(key).get<std::string>();
  };
  AccessTokenClaims c;
  c.issuer = opt_string("iss");
  auto sub = opt_string("sub");
  if (!sub) fail("sub missing");
  c.subject = *sub;
  c.audience = opt_string("aud");
  auto scope = opt_string("scope");
  if (!scope) fail("scope missing");
  c.scope = *scope;
  if (!j.contains("exp") || !j.at("exp").is_number_integer()) fail("exp missing");
  c.expiry = j.at("exp").get<std::int64_t>();
  if (j.contains("iat")) {
    if (!j.at("iat").is_number_integer()) fail("iat not an integer");
    c.issued_at = j.at("iat").get<std::int64_t>();
  }
  if (j.contains("producerSnssaiList")) {
    if (!j.at("producerSnssaiList").is_array()) fail("producerSnssaiList not an array");
    std::vector<Snssai> list;
    for (const auto& s : j.at("producerSnssaiList")) list.push_back(Snssai::from_json(s));
    c.producer_snssai_list = std::move(list);
  }
  if (j.contains("producerNsiList")) {
    const auto& list = j.at("producerNsiList");
    if (!list.is_array()) fail("producerNsiList not an array");
    std::vector<std::string> out;
    for (const auto& s : list) {
      if (!s.is_string()) fail("producerNsiList entry not a string");
      out.push_back(s.get<std::string>());
    }
    c.producer_nsi_list = std::move(out);
  }
  return c;
}

SignedToken SignedToken::decode(const std::string& compact) {
  auto parts = split(compact, '.');
  if (parts.size() != 3) throw Error(Errc::kMalformedTokenResponse, "token is not a 3-segment JWS");
  auto header = decode_segment(parts[0]);
  auto payload = decode_segment(parts[1]);
  if (!header || !payload) throw Error(Errc::kMalformedTokenResponse, "token segment undecodable");
  SignedToken t;
  t.compact = compact;
  t.alg = header->value("alg", "");
  t.claims = AccessTokenClaims::from_json(*payload);
  return t;
}

bool is_known_nf_type(std::string_view nf_type) {
  return std::find(std::begin(kKnownNfTypes), std::end(kKnownNfTypes), nf_type) !=
         std::end(kKnownNfTypes);
}

std::vector<std::pair<std::string, std::string>> TokenRequest::to_form() const {
  std::vector<std::pair<std::string, std::string>> f{
      {"grant_type", "client_credentials"},
      {"nfInstanceId", consumer_instance_id},
      {"nfType", consumer_nf_type},
      {"targetNfType", target_nf_type},
      {"scope", requested_scope},
  };
  if (target_snssai_list) {
    Json list = Json::array();
    for (const auto& s : *target_snssai_list) list.push_back(s.to_json());
    f.emplace_back("targetSnssaiList", list.dump());
  }
  if (target_nsi_list) f.emplace_back("targetNsiList", Json(*target_nsi_list).dump());
  return f;
}

Json TokenRequest::to_json() const {
  Json j{{"nf_instance_id", consumer_instance_id},
         {"nf_type", consumer_nf_type},
         {"target_nf_type", target_nf_type},
         {"scope", requested_scope}};
  if (target_snssai_list) {
    Json list = Json::array();
    for (const auto& s : *target_snssai_list) list.push_back(s.to_json());
    j["target_snssai_list"] = list;
  }
  if (target_nsi_list) j["target_nsi_list"] = *target_nsi_list;
  return j;
}

TokenRequest TokenRequest::from_json(const Json& j) {
  TokenRequest r;
  r.consumer_instance_id = j.value("nf_instance_id", "");
  r.consumer_nf_type = j.value("nf_type", "");
  r.target_nf_type = j.value("target_nf_type", "");
  r.requested_scope = j.value("scope", "");
  if (j.contains("target_snssai_list")) {
    std::vector<Snssai> list;
    for (const auto& s : j.at("target_snssai_list")) list.push_back(Snssai::from_json(s));
    r.target_snssai_list = std::move(list);
  }
  if (j.contains("target_nsi_list")) {
    r.target_nsi_list = j.at("target_nsi_list").get<std::vector<std::string>>();
  }
  return r;
}

std::string_view verifier_mode_name(VerifierMode mode) {
  switch (mode) {
    case VerifierMode::kCorrect: return "CORRECT";
    case VerifierMode::kSeededScopeShadow: return "SEEDED_SCOPE_SHADOW";
    case VerifierMode::kFree5gcMinimal: return "FREE5GC_MINIMAL";
  }
  return "?";
}

std::optional<VerifierMode> parse_verifier_mode(std::string_view text) {
  const auto up = to_upper(text);
  if (up == "CORRECT") return VerifierMode::kCorrect;
  if (up == "SEEDED_SCOPE_SHADOW" || up == "SEEDED") return VerifierMode::kSeededScopeShadow;
  if (up == "FREE5GC_MINIMAL" || up == "MINIMAL") return VerifierMode::kFree5gcMinimal;
  return std::nullopt;
}

std::string_view failure_cause_name(FailureCause cause) {
  switch (cause) {
    case FailureCause::kBadSignature: return "BadSignature";
    case FailureCause::kExpired: return "Expired";
    case FailureCause::kScopeMismatch: return "ScopeMismatch";
    case FailureCause::kAudienceMismatch: return "AudienceMismatch";
    case FailureCause::kSliceMismatch: return "SliceMismatch";
    case FailureCause::kMalformed: return "Malformed";
  }
  return "?";
}

SignedToken mint_token(const TokenRequest& request, const std::string& issuer_id,
                       std::span<const std::uint8_t> key, std::int64_t ttl,
                       ClaimCompleteness mode, std::int64_t now) {
  if (key.size() < 32) throw Error(Errc::kWeakKey, "HS256 key shorter than 32 bytes");
  if (trim(request.requested_scope).empty()) throw Error(Errc::kEmptyScope, "requested scope is empty");

  AccessTokenClaims c;
  c.subject = request.consumer_instance_id;
  c.scope = request.requested_scope;
  c.expiry = now + ttl;
  if (mode == ClaimCompleteness::kFull) {
    c.issuer = issuer_id;
    c.audience = request.target_nf_type;
    c.issued_at = now;
    c.producer_snssai_list = request.target_snssai_list;
    c.producer_nsi_list = request.target_nsi_list;
  }

  const std::string signing_input =
      base64url_encode(kHeader) + "." + base64url_encode(c.to_json().dump());
  SignedToken t;
  t.compact = signing_input + "." + signing_input_signature(signing_input, key);
  t.claims = std::move(c);
  t.expires_in = ttl;
  return t;
}

VerificationResult verify_token(std::string_view compact, std::string_view expected_service,
                                const ProducerIdentity& self, std::span<const std::uint8_t> key,
                                std::int64_t now, VerifierMode mode) {
  using R = VerificationResult;
  auto parts = split(compact, '.');
  if (parts.size() != 3) return R::reject(FailureCause::kMalformed);
  auto header = decode_segment(parts[0]);
  auto payload = decode_segment(parts[1]);
  auto signature = base64url_decode(parts[2]);
  if (!header || !payload || !signature) return R::reject(FailureCause::kMalformed);
  if (header->value("alg", "") != "HS256") return R::reject(FailureCause::kMalformed);
  AccessTokenClaims claims;
  try {
    claims = AccessTokenClaims::from_json(*payload);
  } catch (const Error&) {
    return R::reject(FailureCause::kMalformed);
  }

  const std::string_view signing_input = compact.substr(0, parts[0].size() + 1 + parts[1].size());
  const auto expected = hmac_sha256(key, signing_input);
  if (!constant_time_equal(expected, *signature)) return R::reject(FailureCause::kBadSignature);
  if (claims.expiry <= now) return R::reject(FailureCause::kExpired);

  const auto scopes = claims.scopes();
  const bool in_scope =
      std::find(scopes.begin(), scopes.end(), expected_service) != scopes.end();

  switch (mode) {
    case VerifierMode::kSeededScopeShadow:
      // The scope failure is computed and then dropped.
      (void)in_scope;
      return R::accept();
    case VerifierMode::kFree5gcMinimal:
      if (scopes.empty() || !in_scope) return R::reject(FailureCause::kScopeMismatch);
      return R::accept();
    case VerifierMode::kCorrect:
      break;
  }

  if (!in_scope) return R::reject(FailureCause::kScopeMismatch);
  if (claims.audience && *claims.audience != self.nf_type && *claims.audience != self.instance_id) {
    return R::reject(FailureCause::kAudienceMismatch);
  }
  if (claims.producer_snssai_list &&
      !slices_intersect(*claims.producer_snssai_list, self.served_snssais)) {
    return R::reject(FailureCause::kSliceMismatch);
  }
  return R::accept();
}

SignedToken acquire_token(const std::string& endpoint, const TokenRequest& request,
                          Transport& transport) {
  ConcreteRequest req;
  req.method = "POST";
  req.url = endpoint;
  req.headers = {{"Content-Type", "application/x-www-form-urlencoded"},
                 {"Accept", "application/json"}};
  req.body = form_encode(request.to_form());
  req.provenance.template_id = "POST /oauth2/token";
  req.provenance.mutation = "token";

  auto res = transport.send(req);
  if (res.failed()) throw Error(Errc::kTransportError, endpoint + ": " + *res.transport_error);
  if (res.status < 200 || res.status > 299) {
    throw Error(Errc::kTokenDenied, endpoint + " answered " + std::to_string(res.status));
  }
  auto body = Json::parse(res.body, nullptr, false);
  if (body.is_discarded() || !body.is_object() || !body.contains("access_token") ||
      !body.at("access_token").is_string()) {
    throw Error(Errc::kMalformedTokenResponse, "response lacks access_token");
  }
  if (body.contains("token_type") &&
      (!body.at("token_type").is_string() || to_lower(body.at("token_type").get<std::string>()) != "bearer")) {
    throw Error(Errc::kMalformedTokenResponse, "token_type is not Bearer");
  }
  SignedToken t = SignedToken::decode(body.at("access_token").get<std::string>());
  if (body.contains("expires_in")) {
    if (!body.at("expires_in").is_number_integer()) {
      throw Error(Errc::kMalformedTokenResponse, "expires_in is not an integer");
    }
    t.expires_in = body.at("expires_in").get<std::int64_t>();
  }
  return t;
}

Json TokenProviderConfig::to_json() const {
  Json j{{"mode", mode == Mode::kFile ? "file" : "fetch"}};
  if (mode == Mode::kFile) {
    j["path"] = path.string();
  } else {
    j["endpoint"] = endpoint;
    j["request"] = request.to_json();
  }
  j["refresh_margin"] = refresh_margin;
  return j;
}

TokenProviderConfig TokenProviderConfig::from_json(const Json& j) {
  TokenProviderConfig c;
  const auto mode = j.value("mode", "fetch");
  if (mode == "file") {
    c.mode = Mode::kFile;
    c.path = j.value("path", "");
  } else if (mode == "fetch") {
    c.mode = Mode::kFetch;
    c.endpoint = j.value("endpoint", "");
    if (j.contains("request")) c.request = TokenRequest::from_json(j.at("request"));
  } else {
    throw Error(Errc::kConfigError, "token mode must be file or fetch, got " + mode);
  }
  c.refresh_margin = j.value("refresh_margin", std::int64_t{30});
  return c;
}

TokenProvider::TokenProvider(TokenProviderConfig config, std::shared_ptr<Transport> transport,
                             Clock clock)
    : config_(std::move(config)), transport_(std::move(transport)), clock_(std::move(clock)) {}

SignedToken TokenProvider::current() {
  std::lock_guard lock(mu_);
  if (config_.mode == TokenProviderConfig::Mode::kFile) {
    if (!cached_) {
      std::string text;
      try {
        text = read_file(config_.path);
      } catch (const Error&) {
        throw Error(Errc::kFileUnreadable, config_.path.string());
      }
      const auto line = std::string(trim(text.substr(0, text.find('\n'))));
      SignedToken t;
      try {
        t = SignedToken::decode(line);
      } catch (const Error&) {
        // Unparseable tokens are still sent verbatim; the target decides.
        t.compact = line;
      }
      cached_ = std::move(t);
    }
    return *cached_;
  }

  const auto now = clock_();
  if (!cached_ || now >= refresh_at_) {
    if (!transport_) throw Error(Errc::kTokenAcquisitionFailed, "no transport for token fetch");
    auto t = acquire_token(config_.endpoint, config_.request, *transport_);
    refresh_at_ = t.expires_in ? now + *t.expires_in - config_.refresh_margin
                               : t.claims.expiry - config_.refresh_margin;
    cached_ = std::move(t);
  }
  return *cached_;
}

ConcreteRequest attach_token(const ConcreteRequest& request, const SignedToken& token,
                             std::vector<std::string>* diagnostics) {
  ConcreteRequest out = request;
  if (request.auth_from_overlay && request.header("Authorization")) {
    if (diagnostics) {
      diagnostics->push_back("Authorization supplied by dictionary overlay kept for " +
                             request.provenance.template_id);
    }
    return out;
  }
  set_header(out.headers, "Authorization", "Bearer " + token.compact);
  return out;
}

}  // namespace sbifuzz
