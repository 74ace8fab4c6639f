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

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbifuzz/util.hpp"

namespace sbifuzz {

// An OpenAPI document as parsed from disk, references untouched.
struct RawSpecDocument {
  std::filesystem::path source_path;
  Json document;
  std::string format_version;
};

// A self-contained document: every `$ref` is local and resolvable.
struct ResolvedSpec {
  Json document;
  std::filesystem::path origin;
  std::vector<std::string> server_urls;
  // "#/components/<section>/<name>" -> subtree
  std::map<std::string, Json> component_index;
};

struct HostMap {
  // logical NF name ("udm") -> "host:port"
  std::map<std::string, std::string> entries;
  std::string default_scheme = "http";
  // API name ("nudm-sdm") or file stem -> NF name; wins over derivation.
  std::map<std::string, std::string> service_overrides;
  std::optional<std::string> default_host;

  // Accepts {"scheme": ..., "hosts": {nf: "host:port"}, "overrides": {...},
  // "default": "host:port"}. Throws kConfigError on bad ports/duplicates.
  static HostMap from_json(const Json& j);
  Json to_json() const;
  void validate() const;
};

struct Diagnostic {
  std::string kind;      // "missing-schema" | "no-responses" | "unreachable-component" | ...
  std::string location;  // "GET /shared-data", "#/components/schemas/X"
  std::string message;
};

// Loads a referenced file. `ref_file` is the file part of a `$ref`,
// `referrer` the document containing it.
using FileResolver = std::function<RawSpecDocument(
    const std::string& ref_file, const std::filesystem::path& referrer)>;

RawSpecDocument parse_document(std::string_view text,
                               const std::filesystem::path& source_path);
RawSpecDocument load_document(const std::filesystem::path& path);

// Looks next to the referrer first, then in each search directory.
FileResolver filesystem_resolver(std::vector<std::filesystem::path> search_dirs = {});
// Serves documents from memory, keyed by file name.
FileResolver memory_resolver(std::map<std::string, std::string> files);

struct RefTarget {
  std::string file;     // empty for document-local refs
  std::string pointer;  // JSON pointer, "" for the whole document
};
RefTarget parse_ref(std::string_view ref);

ResolvedSpec resolve_refs(const RawSpecDocument& raw, const FileResolver& resolver);
RawSpecDocument as_raw(const ResolvedSpec& spec);

// API name of a spec: first server-path segment after the API root
// ("nudm-sdm"), else the normalized origin file stem.
std::string api_name(const ResolvedSpec& spec);
// "nudm-sdm" -> "udm"; first `n<nf>` token of the name.
std::optional<std::string> nf_from_api_name(std::string_view api);
std::string service_for(const ResolvedSpec& spec, const HostMap& hosts);

ResolvedSpec rewrite_servers(const ResolvedSpec& spec, const HostMap& hosts);
std::vector<Diagnostic> validate_spec(const ResolvedSpec& spec);

// Full pipeline for a file already on disk.
ResolvedSpec load_resolved(const std::filesystem::path& path,
                           std::vector<std::filesystem::path> search_dirs = {});

std::string to_yaml(const ResolvedSpec& spec);
// Writes <out_dir>/<stem>.yaml and returns the path.
std::filesystem::path write_bundle(const ResolvedSpec& spec,
                                   const std::filesystem::path& out_dir);

// Calls fn(node) on every object node carrying a string `$ref`.
void for_each_ref(const Json& node, const std::function<void(const std::string&)>& fn);

inline constexpr std::string_view kHttpMethods[] = {
    "get", "put", "post", "delete", "patch", "head", "options", "trace"};

}  // namespace sbifuzz
