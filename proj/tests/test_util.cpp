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

#include "sbifuzz/util.hpp"
#include "sbifuzz/yaml_io.hpp"

namespace sbifuzz {
namespace {

TEST(Base64Url, RoundTripsEveryLength) {
  std::string text;
  for (int n = 0; n < 40; ++n) {
    const auto enc = base64url_encode(text);
    EXPECT_EQ(enc.find('='), std::string::npos);
    const auto dec = base64url_decode(enc);
    ASSERT_TRUE(dec);
    EXPECT_EQ(std::string(dec->begin(), dec->end()), text);
    text.push_back(static_cast<char>(n * 37));
  }
}

TEST(Base64Url, RejectsPaddingForeignCharsAndTrailingBits) {
  EXPECT_FALSE(base64url_decode("QQ=="));
  EXPECT_FALSE(base64url_decode("Q+Q"));
  EXPECT_FALSE(base64url_decode("QR"));  // low bits of R are set
  EXPECT_FALSE(base64url_decode("Q"));
  EXPECT_TRUE(base64url_decode("QQ"));
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hmac, Rfc4231Case2) {
  const std::string key = "Jefe";
  const auto mac = hmac_sha256(std::span(reinterpret_cast<const std::uint8_t*>(key.data()), key.size()),
                               "what do ya want for nothing?");
  std::string hex;
  for (auto b : mac) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  EXPECT_EQ(hex, "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST(Url, ParsesDefaultsAndExplicitPorts) {
  auto u = parse_url("http://udm:8000/nudm-sdm/v2?x=1");
  ASSERT_TRUE(u);
  EXPECT_EQ(u->host, "udm");
  EXPECT_EQ(u->port, 8000);
  EXPECT_EQ(u->path, "/nudm-sdm/v2");
  EXPECT_EQ(u->query, "x=1");
  EXPECT_EQ(u->origin(), "http://udm:8000");
  EXPECT_EQ(parse_url("https://nrf/x")->port, 443);
  EXPECT_FALSE(has_explicit_port("http://nrf/x"));
  EXPECT_FALSE(parse_url("not a url"));
}

TEST(Form, EncodeDecodeRoundTrip) {
  std::vector<std::pair<std::string, std::string>> fields = {
      {"grant_type", "client_credentials"}, {"scope", "nudm-sdm nnrf-disc"}, {"odd", "a&b=c"}};
  EXPECT_EQ(form_decode(form_encode(fields)), fields);
}

TEST(Formats, UuidUriAndTimestamp) {
  EXPECT_TRUE(is_uuid("8f3c2a10-0000-4000-8000-000000000005"));
  EXPECT_FALSE(is_uuid("not-a-uuid"));
  EXPECT_TRUE(is_absolute_uri("http://example.invalid/cb"));
  EXPECT_FALSE(is_absolute_uri("not a uri"));
  EXPECT_TRUE(is_rfc3339("2030-01-01T00:00:00Z"));
  EXPECT_TRUE(is_rfc3339("2030-01-01T00:00:00.5+02:00"));
  EXPECT_FALSE(is_rfc3339("garbage"));
}

TEST(Json, CanonicalDumpIgnoresKeyOrder) {
  EXPECT_TRUE(content_equal(Json::parse(R"({"a":1,"b":[1,{"y":2,"x":1}]})"),
                            Json::parse(R"({"b":[1,{"x":1,"y":2}],"a":1})")));
  EXPECT_FALSE(content_equal(Json::parse("[1,2]"), Json::parse("[2,1]")));
}

TEST(Yaml, EmitThenParseIsIdentity) {
  const auto doc = Json::parse(R"({"s":"true","n":3,"f":1.5,"b":false,"z":null,"l":["010203","x: y"],
                                   "o":{"empty":{},"arr":[]}})");
  EXPECT_EQ(parse_yaml(emit_yaml(doc)), doc);
}

}  // namespace
}  // namespace sbifuzz
