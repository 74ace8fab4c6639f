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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sbifuzz {

// Spec documents keep their key order so bundles read like their sources.
using Json = nlohmann::ordered_json;

std::string sha256_hex(std::string_view data);
std::vector<std::uint8_t> hmac_sha256(std::span<const std::uint8_t> key,
                                      std::string_view data);
bool constant_time_equal(std::span<const std::uint8_t> a,
                         std::span<const std::uint8_t> b);

std::string base64url_encode(std::span<const std::uint8_t> bytes);
std::string base64url_encode(std::string_view text);
// Strict: rejects padding, foreign characters and non-zero trailing bits.
std::optional<std::vector<std::uint8_t>> base64url_decode(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);
std::string to_lower(std::string_view text);
std::string to_upper(std::string_view text);
bool starts_with(std::string_view text, std::string_view prefix);

std::string percent_encode(std::string_view text);
std::string form_encode(const std::vector<std::pair<std::string, std::string>>& fields);
std::vector<std::pair<std::string, std::string>> form_decode(std::string_view body);

struct Url {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;   // begins with '/' or is empty
  std::string query;  // without '?'

  std::string origin() const;
  std::string host_port() const;
};

// Parses absolute http(s) URLs; port defaults from the scheme when absent.
std::optional<Url> parse_url(std::string_view text);
bool has_explicit_port(std::string_view url);

bool is_uuid(std::string_view text);
bool is_absolute_uri(std::string_view text);
bool is_rfc3339(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Sorted-key dump of a JSON tree; equal content yields equal text.
std::string canonical_dump(const Json& value);
bool content_equal(const Json& a, const Json& b);

}  // namespace sbifuzz
