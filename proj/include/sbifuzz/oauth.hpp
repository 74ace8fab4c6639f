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
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sbifuzz/http.hpp"
#include "sbifuzz/util.hpp"

namespace sbifuzz {

using Key = std::vector<std::uint8_t>;
Key key_from_string(std::string_view secret);

// Unix seconds.
using Clock = std::function<std::int64_t()>;
std::int64_t system_now();

struct Snssai {
  int sst = 0;
  std::optional<std::string> sd;  // 6 hex digits

  bool valid() const;
  bool operator==(const Snssai&) const = default;
  Json to_json() const;
  static Snssai from_json(const Json& j);
};

struct AccessTokenClaims {
  std::optional<std::string> issuer;    // NRF instance id
  std::string subject;                  // consumer instance id
  std::optional<std::string> audience;  // producer NF type or instance id
  std::string scope;                    // space separated service names
  std::int64_t expiry = 0;
  std::optional<std::int64_t> issued_at;
  std::optional<std::vector<Snssai>> producer_snssai_list;
  std::optional<std::vector<std::string>> producer_nsi_list;

  std::vector<std::string> scopes() const;
  bool operator==(const AccessTokenClaims&) const = default;

  // Wire names: iss, sub, aud, scope, exp, iat, producerSnssaiList, producerNsiList.
  Json to_json() const;
  // Throws Error(kMalformedTokenResponse) on missing/ill-typed members.
  static AccessTokenClaims from_json(const Json& j);
};

struct SignedToken {
  std::string compact;  // header.payload.signature
  AccessTokenClaims claims;
  std::string alg = "HS256";
  std::optional<std::int64_t> expires_in;  // as reported by the token endpoint

  // Splits and decodes without checking the signature.
  static SignedToken decode(const std::string& compact);
};

inline constexpr std::string_view kKnownNfTypes[] = {
    "AMF", "SMF", "UDM", "UDR", "NSSF", "PCF", "NRF", "AUSF", "NEF", "CHF"};
bool is_known_nf_type(std::string_view nf_type);

struct TokenRequest {
  std::string consumer_instance_id;
  std::string consumer_nf_type;
  std::string target_nf_type;
  std::string requested_scope;
  std::optional<std::vector<Snssai>> target_snssai_list;
  std::optional<std::vector<std::string>> target_nsi_list;

  bool uses_unknown_nf_type() const {
    return !is_known_nf_type(consumer_nf_type) || !is_known_nf_type(target_nf_type);
  }
  std::vector<std::pair<std::string, std::string>> to_form() const;
  Json to_json() const;
  static TokenRequest from_json(const Json& j);
};

enum class ClaimCompleteness { kFull, kFree5gcPartial };
enum class VerifierMode { kCorrect, kSeededScopeShadow, kFree5gcMinimal };
enum class FailureCause { kBadSignature, kExpired, kScopeMismatch, kAudienceMismatch, kSliceMismatch, kMalformed };

std::string_view verifier_mode_name(VerifierMode mode);
std::optional<VerifierMode> parse_verifier_mode(std::string_view text);
std::string_view failure_cause_name(FailureCause cause);

struct VerificationResult {
  bool accepted = false;
  std::optional<FailureCause> failure_cause;

  static VerificationResult accept() { return {true, std::nullopt}; }
  static VerificationResult reject(FailureCause cause) { return {false, cause}; }
};

struct ProducerIdentity {
  std::string nf_type;
  std::string instance_id;
  std::vector<Snssai> served_snssais;
  std::vector<std::string> served_nsis;
};

// Throws kWeakKey (key < 32 bytes) or kEmptyScope.
SignedToken mint_token(const TokenRequest& request, const std::string& issuer_id,
                       std::span<const std::uint8_t> key, std::int64_t ttl,
                       ClaimCompleteness mode, std::int64_t now);

// Checks, in order: Malformed, BadSignature, Expired (all modes), then per mode:
//  kCorrect           ScopeMismatch, AudienceMismatch, SliceMismatch
//  kFree5gcMinimal    scope list non-empty and containing the service
//  kSeededScopeShadow scope is evaluated but its failure is dropped
VerificationResult verify_token(std::string_view compact, std::string_view expected_service,
                                const ProducerIdentity& self, std::span<const std::uint8_t> key,
                                std::int64_t now, VerifierMode mode);

// Client-credentials grant against an NRF token endpoint. The returned
// token's signature is not checked.
SignedToken acquire_token(const std::string& endpoint, const TokenRequest& request,
                          Transport& transport);

struct TokenProviderConfig {
  enum class Mode { kFile, kFetch };
  Mode mode = Mode::kFetch;
  std::filesystem::path path;
  std::string endpoint;
  TokenRequest request;
  std::int64_t refresh_margin = 30;

  Json to_json() const;
  static TokenProviderConfig from_json(const Json& j);
};

// Yields a current token; safe to share across threads.
class TokenProvider {
 public:
  TokenProvider(TokenProviderConfig config, std::shared_ptr<Transport> transport,
                Clock clock = system_now);

  SignedToken current();
  const TokenProviderConfig& config() const { return config_; }

 private:
  TokenProviderConfig config_;
  std::shared_ptr<Transport> transport_;
  Clock clock_;
  std::mutex mu_;
  std::optional<SignedToken> cached_;
  std::int64_t refresh_at_ = 0;
};

// Sets `Authorization: Bearer <compact>`, replacing any earlier value. A
// header supplied through the dictionary overlay is kept and reported.
ConcreteRequest attach_token(const ConcreteRequest& request, const SignedToken& token,
                             std::vector<std::string>* diagnostics = nullptr);

}  // namespace sbifuzz
