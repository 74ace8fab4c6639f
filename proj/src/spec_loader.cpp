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

#include "sbifuzz/spec_loader.hpp"

#include <algorithm>
#include <deque>
#include <regex>
#include <set>

#include "sbifuzz/error.hpp"
#include "sbifuzz/yaml_io.hpp"

namespace sbifuzz {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- HostMap

HostMap HostMap::from_json(const Json& j) {
  HostMap map;
  if (!j.is_object()) throw Error(Errc::kConfigError, "host map must be an object");
  if (j.contains("scheme")) map.default_scheme = j.at("scheme").get<std::string>();
  if (j.contains("hosts")) {
    for (const auto& [k, v] : j.at("hosts").items()) {
      if (map.entries.count(to_lower(k))) {
        throw Error(Errc::kConfigError, "duplicate service " + k);
      }
      map.entries[to_lower(k)] = v.get<std::string>();
    }
  }
  if (j.contains("overrides")) {
    for (const auto& [k, v] : j.at("overrides").items()) {
      map.service_overrides[k] = v.get<std::string>();
    }
  }
  if (j.contains("default")) map.default_host = j.at("default").get<std::string>();
  map.validate();
  return map;
}

Json HostMap::to_json() const {
  Json j;
  j["scheme"] = default_scheme;
  j["hosts"] = Json::object();
  for (const auto& [k, v] : entries) j["hosts"][k] = v;
  if (!service_overrides.empty()) {
    j["overrides"] = Json::object();
    for (const auto& [k, v] : service_overrides) j["overrides"][k] = v;
  }
  if (default_host) j["default"] = *default_host;
  return j;
}

namespace {

void check_host_port(const std::string& name, const std::string& hp) {
  const auto colon = hp.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(Errc::kConfigError, "host for " + name + " needs host:port, got " + hp);
  }
  int port = 0;
  try {
    port = std::stoi(hp.substr(colon + 1));
  } catch (const std::exception&) {
    port = 0;
  }
  if (port < 1 || port > 65535) {
    throw Error(Errc::kConfigError, "port out of range for " + name + ": " + hp);
  }
}

}  // namespace

void HostMap::validate() const {
  if (default_scheme != "http" && default_scheme != "https") {
    throw Error(Errc::kConfigError, "scheme must be http or https");
  }
  for (const auto& [name, hp] : entries) check_host_port(name, hp);
  if (default_host) check_host_port("default", *default_host);
}

// ---------------------------------------------------------------- loading

RawSpecDocument parse_document(std::string_view text, const fs::path& source_path) {
  RawSpecDocument raw;
  raw.source_path = source_path;
  raw.document = parse_yaml(text);
  if (!raw.document.is_object()) {
    throw Error(Errc::kParseError, source_path.string() + ": root is not a mapping");
  }
  const auto& doc = raw.document;
  if (!doc.contains("openapi")) {
    throw Error(Errc::kUnsupportedVersion,
                source_path.string() + ": no `openapi` field (Swagger 2.0?)");
  }
  const auto& version = doc.at("openapi");
  raw.format_version =
      version.is_string() ? version.get<std::string>() : version.dump();
  if (!starts_with(raw.format_version, "3.0") && !starts_with(raw.format_version, "3.1")) {
    throw Error(Errc::kUnsupportedVersion,
                source_path.string() + ": openapi " + raw.format_version);
  }
  for (const char* key : {"info", "paths"}) {
    if (!doc.contains(key)) {
      throw Error(Errc::kMissingRoot, source_path.string() + ": missing `" + key + "`");
    }
  }
  return raw;
}

RawSpecDocument load_document(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw Error(Errc::kResolverIO, "cannot read " + path.string());
  }
  return parse_document(text, path);
}

FileResolver filesystem_resolver(std::vector<fs::path> search_dirs) {
  return [dirs = std::move(search_dirs)](const std::string& ref_file,
                                         const fs::path& referrer) {
    std::vector<fs::path> candidates;
    candidates.push_back(referrer.parent_path() / ref_file);
    for (const auto& d : dirs) candidates.push_back(d / ref_file);
    for (const auto& c : candidates) {
      std::error_code ec;
      if (fs::is_regular_file(c, ec)) return load_document(c);
    }
    throw Error(Errc::kResolverIO,
                "cannot locate " + ref_file + " referenced from " + referrer.string());
  };
}

FileResolver memory_resolver(std::map<std::string, std::string> files) {
  return [files = std::move(files)](const std::string& ref_file, const fs::path&) {
    const auto name = fs::path(ref_file).filename().string();
    auto it = files.find(name);
    if (it == files.end()) throw Error(Errc::kResolverIO, "no such file " + ref_file);
    return parse_document(it->second, fs::path(name));
  };
}

RefTarget parse_ref(std::string_view ref) {
  std::string compact;
  for (char c : ref) {
    if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
  }
  RefTarget target;
  const auto hash = compact.find('#');
  if (hash == std::string::npos) {
    target.file = compact;
  } else {
    target.file = compact.substr(0, hash);
    target.pointer = compact.substr(hash + 1);
  }
  return target;
}

void for_each_ref(const Json& node, const std::function<void(const std::string&)>& fn) {
  if (node.is_object()) {
    auto it = node.find("$ref");
    if (it != node.end() && it->is_string()) fn(it->get<std::string>());
    for (const auto& [k, v] : node.items()) for_each_ref(v, fn);
  } else if (node.is_array()) {
    for (const auto& v : node) for_each_ref(v, fn);
  }
}

// ---------------------------------------------------------------- bundling

namespace {

std::string file_key(const fs::path& p) {
  std::error_code ec;
  auto canon = fs::weakly_canonical(p, ec);
  return ec ? p.lexically_normal().string() : canon.string();
}

const Json* lookup(const Json& doc, const std::string& pointer) {
  try {
    Json::json_pointer ptr(pointer);
    if (!doc.contains(ptr)) return nullptr;
    return &doc.at(ptr);
  } catch (const nlohmann::json::exception&) {
    return nullptr;
  }
}

// /components/<section>/<name>
std::optional<std::pair<std::string, std::string>> component_slot(const std::string& pointer) {
  auto parts = split(pointer, '/');
  if (parts.size() != 4 || !parts[0].empty() || parts[1] != "components") return std::nullopt;
  return std::make_pair(parts[2], parts[3]);
}

class Bundler {
 public:
  Bundler(const RawSpecDocument& root, const FileResolver& resolver)
      : resolver_(resolver), root_key_(file_key(root.source_path)) {
    docs_.emplace(root_key_, root);
    out_ = root.document;
    if (out_.contains("components")) {
      for (const auto& [section, entries] : out_["components"].items()) {
        if (!entries.is_object()) continue;
        for (const auto& [name, value] : entries.items()) {
          const std::string local = "#/components/" + section + "/" + name;
          owner_[local] = {root_key_, "/components/" + section + "/" + name};
          raw_of_[local] = value;
        }
      }
    }
  }

  Json run() {
    // Imports land in extra_ so no node of out_ moves while it is walked.
    walk(out_, root_key_);
    for (auto& [section, entries] : extra_.items()) {
      for (auto& [name, value] : entries.items()) {
        out_["components"][section][name] = std::move(value);
      }
    }
    return std::move(out_);
  }

 private:
  const RawSpecDocument& doc_for(const std::string& key) { return docs_.at(key); }

  std::string load_file(const std::string& ref_file, const std::string& ctx_key) {
    const auto& ctx = doc_for(ctx_key);
    RawSpecDocument loaded;
    try {
      loaded = resolver_(ref_file, ctx.source_path);
    } catch (const Error& e) {
      if (e.code() == Errc::kResolverIO) throw;
      throw Error(Errc::kResolverIO, std::string(e.what()));
    }
    auto key = file_key(loaded.source_path);
    if (!docs_.count(key)) docs_.emplace(key, std::move(loaded));
    return key;
  }

  void walk(Json& node, const std::string& ctx) {
    if (node.is_object()) {
      auto it = node.find("$ref");
      if (it != node.end() && it->is_string()) {
        auto target = parse_ref(it->get<std::string>());
        const std::string file = target.file.empty() ? ctx : load_file(target.file, ctx);
        auto replacement = import(file, target.pointer);
        if (replacement.is_string()) {
          node["$ref"] = replacement;
        } else {
          node = std::move(replacement);
        }
        return;
      }
      for (auto& [k, v] : node.items()) walk(v, ctx);
    } else if (node.is_array()) {
      for (auto& v : node) walk(v, ctx);
    }
  }

  // Returns a local ref string, or an inlined subtree for pointers that do
  // not name a component.
  Json import(const std::string& file, const std::string& pointer) {
    const auto& doc = doc_for(file).document;
    const Json* target = lookup(file == root_key_ ? doc_for(root_key_).document : doc, pointer);
    if (target == nullptr) {
      throw Error(Errc::kDanglingRef, doc_for(file).source_path.string() + "#" + pointer);
    }
    if (file == root_key_) return "#" + pointer;

    const auto key = std::make_pair(file, pointer);
    if (auto it = imported_.find(key); it != imported_.end()) return it->second;

    auto slot = component_slot(pointer);
    if (!slot) {
      if (inlining_.count(key)) {
        throw Error(Errc::kDanglingRef, "cyclic reference through non-component " + pointer);
      }
      inlining_.insert(key);
      Json copy = *target;
      walk(copy, file);
      inlining_.erase(key);
      return copy;
    }

    const auto& [section, name] = *slot;
    std::string local = "#/components/" + section + "/" + name;
    if (auto existing = owner_.find(local); existing != owner_.end()) {
      if (content_equal(raw_of_.at(local), *target)) {
        imported_[key] = local;
        return local;
      }
      const std::string renamed =
          name + "_from_" + fs::path(doc_for(file).source_path).stem().string();
      local = "#/components/" + section + "/" + renamed;
      if (auto again = owner_.find(local); again != owner_.end()) {
        if (content_equal(raw_of_.at(local), *target)) {
          imported_[key] = local;
          return local;
        }
        throw Error(Errc::kCollisionUnresolvable,
                    "component " + section + "/" + name + " from " +
                        doc_for(file).source_path.string());
      }
    }
    imported_[key] = local;
    owner_[local] = key;
    raw_of_[local] = *target;

    Json copy = *target;
    walk(copy, file);
    const auto final_name = split(local, '/').back();
    extra_[section][final_name] = std::move(copy);
    return local;
  }

  const FileResolver& resolver_;
  std::string root_key_;
  std::map<std::string, RawSpecDocument> docs_;
  Json out_;
  Json extra_ = Json::object();
  std::map<std::pair<std::string, std::string>, std::string> imported_;
  std::map<std::string, std::pair<std::string, std::string>> owner_;
  std::map<std::string, Json> raw_of_;
  std::set<std::pair<std::string, std::string>> inlining_;
};

std::string expand_server_variables(const Json& server) {
  std::string url = server.value("url", "");
  if (server.contains("variables")) {
    for (const auto& [var, spec] : server.at("variables").items()) {
      const std::string slot = "{" + var + "}";
      const std::string value = spec.value("default", "");
      for (auto pos = url.find(slot); pos != std::string::npos; pos = url.find(slot)) {
        url.replace(pos, slot.size(), value);
      }
    }
  }
  return url;
}

std::string with_explicit_port(const std::string& url) {
  if (has_explicit_port(url)) return url;
  auto parsed = parse_url(url);
  if (!parsed) return url;
  const auto scheme_end = url.find("://") + 3;
  const auto host_end = url.find_first_of("/?#", scheme_end);
  std::string out = url.substr(0, host_end == std::string::npos ? url.size() : host_end);
  out += ":" + std::to_string(parsed->port);
  if (host_end != std::string::npos) out += url.substr(host_end);
  return out;
}

std::vector<std::string> collect_server_urls(const Json& doc) {
  std::vector<std::string> urls;
  if (!doc.contains("servers") || !doc.at("servers").is_array()) return urls;
  for (const auto& server : doc.at("servers")) {
    urls.push_back(with_explicit_port(expand_server_variables(server)));
  }
  return urls;
}

std::map<std::string, Json> index_components(const Json& doc) {
  std::map<std::string, Json> index;
  if (!doc.contains("components")) return index;
  for (const auto& [section, entries] : doc.at("components").items()) {
    if (!entries.is_object()) continue;
    for (const auto& [name, value] : entries.items()) {
      index["#/components/" + section + "/" + name] = value;
    }
  }
  return index;
}

}  // namespace

ResolvedSpec resolve_refs(const RawSpecDocument& raw, const FileResolver& resolver) {
  Bundler bundler(raw, resolver);
  ResolvedSpec spec;
  spec.document = bundler.run();
  spec.origin = raw.source_path;
  spec.component_index = index_components(spec.document);
  spec.server_urls = collect_server_urls(spec.document);

  const auto& doc = spec.document;
  for_each_ref(doc, [&](const std::string& ref) {
    auto target = parse_ref(ref);
    if (!target.file.empty()) {
      throw Error(Errc::kDanglingRef, "external ref survived bundling: " + ref);
    }
    if (lookup(doc, target.pointer) == nullptr) {
      throw Error(Errc::kDanglingRef, raw.source_path.string() + ": " + ref);
    }
  });
  return spec;
}

RawSpecDocument as_raw(const ResolvedSpec& spec) {
  RawSpecDocument raw;
  raw.source_path = spec.origin;
  raw.document = spec.document;
  const auto& v = spec.document.at("openapi");
  raw.format_version = v.is_string() ? v.get<std::string>() : v.dump();
  return raw;
}

// ---------------------------------------------------------------- servers

namespace {

constexpr std::string_view kApiRoot = "{apiRoot}";

std::string first_segment(std::string_view path) {
  while (!path.empty() && path.front() == '/') path.remove_prefix(1);
  const auto slash = path.find('/');
  return std::string(path.substr(0, slash));
}

std::string raw_server_path(const Json& doc) {
  if (!doc.contains("servers") || doc.at("servers").empty()) return "";
  std::string url = doc.at("servers").at(0).value("url", "");
  if (starts_with(url, kApiRoot)) return url.substr(kApiRoot.size());
  if (auto parsed = parse_url(expand_server_variables(doc.at("servers").at(0)))) {
    return parsed->path;
  }
  return "";
}

std::string normalized_stem(const fs::path& origin) {
  std::string stem = to_lower(origin.stem().string());
  std::replace(stem.begin(), stem.end(), '_', '-');
  return stem;
}

}  // namespace

std::string api_name(const ResolvedSpec& spec) {
  auto seg = first_segment(raw_server_path(spec.document));
  if (!seg.empty()) return seg;
  return normalized_stem(spec.origin);
}

std::optional<std::string> nf_from_api_name(std::string_view api) {
  static const std::regex kNfToken("^n[a-z0-9]{2,}$");
  std::string name = to_lower(api);
  std::replace(name.begin(), name.end(), '_', '-');
  for (const auto& token : split(name, '-')) {
    if (std::regex_match(token, kNfToken)) return token.substr(1);
  }
  return std::nullopt;
}

std::string service_for(const ResolvedSpec& spec, const HostMap& hosts) {
  const std::string api = api_name(spec);
  if (auto it = hosts.service_overrides.find(api); it != hosts.service_overrides.end()) {
    return it->second;
  }
  const std::string stem = spec.origin.stem().string();
  if (auto it = hosts.service_overrides.find(stem); it != hosts.service_overrides.end()) {
    return it->second;
  }
  if (auto nf = nf_from_api_name(api)) return *nf;
  return api;
}

ResolvedSpec rewrite_servers(const ResolvedSpec& spec, const HostMap& hosts) {
  ResolvedSpec out = spec;
  auto& doc = out.document;
  if (!doc.contains("servers") || !doc.at("servers").is_array()) return out;

  for (auto& server : doc["servers"]) {
    std::string url = server.value("url", "");
    if (starts_with(url, kApiRoot)) {
      const std::string service = service_for(spec, hosts);
      std::string host;
      if (auto it = hosts.entries.find(service); it != hosts.entries.end()) {
        host = it->second;
      } else if (hosts.default_host) {
        host = *hosts.default_host;
      } else {
        throw Error(Errc::kUnknownService,
                    "no host for service `" + service + "` (" + spec.origin.string() + ")");
      }
      url = hosts.default_scheme + "://" + host + url.substr(kApiRoot.size());
      if (server.contains("variables")) {
        server["variables"].erase("apiRoot");
      }
    }
    if (server.contains("variables")) {
      Json tmp = server;
      tmp["url"] = url;
      url = expand_server_variables(tmp);
      server.erase("variables");
    }
    server["url"] = with_explicit_port(url);
  }
  out.server_urls = collect_server_urls(doc);
  return out;
}

// ---------------------------------------------------------------- validation

std::vector<Diagnostic> validate_spec(const ResolvedSpec& spec) {
  std::vector<Diagnostic> diags;
  const auto& doc = spec.document;
  auto deref = [&](const Json& node) -> const Json& {
    const Json* cur = &node;
    for (int hops = 0; hops < 16 && cur->is_object() && cur->contains("$ref"); ++hops) {
      auto it = spec.component_index.find(cur->at("$ref").get<std::string>());
      if (it == spec.component_index.end()) break;
      cur = &it->second;
    }
    return *cur;
  };

  if (doc.contains("paths") && doc.at("paths").is_object()) {
    for (const auto& [path, item] : doc.at("paths").items()) {
      if (!item.is_object()) continue;
      for (const auto method : kHttpMethods) {
        if (!item.contains(method)) continue;
        const auto& op = item.at(std::string(method));
        const std::string where = to_upper(method) + " " + path;
        Json params = Json::array();
        if (item.contains("parameters")) {
          for (const auto& p : item.at("parameters")) params.push_back(p);
        }
        if (op.contains("parameters")) {
          for (const auto& p : op.at("parameters")) params.push_back(p);
        }
        for (const auto& p : params) {
          const auto& param = deref(p);
          if (!param.contains("schema") && !param.contains("content")) {
            diags.push_back({"missing-schema", where,
                             "parameter `" + param.value("name", "?") + "` has no schema"});
          }
        }
        if (!op.contains("responses") || !op.at("responses").is_object() ||
            op.at("responses").empty()) {
          diags.push_back({"no-responses", where, "operation declares no responses"});
        }
      }
    }
  }

  // Reachability from `paths` through local refs.
  std::set<std::string> reached;
  std::deque<std::string> frontier;
  auto visit = [&](const std::string& ref) {
    if (reached.insert(ref).second) frontier.push_back(ref);
  };
  if (doc.contains("paths")) for_each_ref(doc.at("paths"), visit);
  while (!frontier.empty()) {
    const auto ref = frontier.front();
    frontier.pop_front();
    auto it = spec.component_index.find(ref);
    if (it != spec.component_index.end()) for_each_ref(it->second, visit);
  }
  for (const auto& [ref, value] : spec.component_index) {
    if (starts_with(ref, "#/components/securitySchemes/")) continue;
    if (!reached.count(ref)) {
      diags.push_back({"unreachable-component", ref, "component is never referenced"});
    }
  }
  return diags;
}

ResolvedSpec load_resolved(const fs::path& path, std::vector<fs::path> search_dirs) {
  return resolve_refs(load_document(path), filesystem_resolver(std::move(search_dirs)));
}

std::string to_yaml(const ResolvedSpec& spec) { return emit_yaml(spec.document); }

fs::path write_bundle(const ResolvedSpec& spec, const fs::path& out_dir) {
  const auto target = out_dir / (spec.origin.stem().string() + ".yaml");
  write_file(target, to_yaml(spec));
  return target;
}

}  // namespace sbifuzz
