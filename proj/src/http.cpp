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

#include "sbifuzz/http.hpp"

#include "httplib.h"

namespace sbifuzz {

std::optional<std::string> find_header(const Headers& headers, std::string_view name) {
  const auto lower = to_lower(name);
  for (const auto& [k, v] : headers) {
    if (to_lower(k) == lower) return v;
  }
  return std::nullopt;
}

void set_header(Headers& headers, const std::string& name, const std::string& value) {
  const auto lower = to_lower(name);
  for (auto& [k, v] : headers) {
    if (to_lower(k) == lower) {
      v = value;
      return;
    }
  }
  headers.emplace_back(name, value);
}

void remove_header(Headers& headers, std::string_view name) {
  const auto lower = to_lower(name);
  std::erase_if(headers, [&](const auto& kv) { return to_lower(kv.first) == lower; });
}

Json Provenance::to_json() const {
  return Json{{"template_id", template_id},
              {"mutation", mutation},
              {"choices", choices},
              {"rng_seed", rng_seed},
              {"variant_index", variant_index},
              {"bindings", bindings}};
}

Provenance Provenance::from_json(const Json& j) {
  Provenance p;
  p.template_id = j.value("template_id", "");
  p.mutation = j.value("mutation", "explore");
  if (j.contains("choices")) p.choices = j.at("choices").get<std::vector<std::uint32_t>>();
  p.rng_seed = j.value("rng_seed", std::uint64_t{0});
  p.variant_index = j.value("variant_index", -1);
  if (j.contains("bindings")) p.bindings = j.at("bindings").get<std::map<std::string, std::string>>();
  return p;
}

std::string ConcreteRequest::query() const {
  const auto q = url.find('?');
  return q == std::string::npos ? "" : url.substr(q + 1);
}

std::string ConcreteRequest::bytes() const {
  std::string out = method + " " + url + "\r\n";
  for (const auto& [k, v] : headers) out += k + ": " + v + "\r\n";
  out += "\r\n";
  out += body;
  return out;
}

Json ConcreteRequest::to_json() const {
  Json h = Json::array();
  for (const auto& [k, v] : headers) h.push_back(Json::array({k, v}));
  return Json{{"method", method}, {"url", url}, {"headers", h}, {"body", body},
              {"provenance", provenance.to_json()}, {"auth_from_overlay", auth_from_overlay}};
}

ConcreteRequest ConcreteRequest::from_json(const Json& j) {
  ConcreteRequest r;
  r.method = j.at("method").get<std::string>();
  r.url = j.at("url").get<std::string>();
  for (const auto& kv : j.at("headers")) {
    r.headers.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
  }
  r.body = j.value("body", "");
  if (j.contains("provenance")) r.provenance = Provenance::from_json(j.at("provenance"));
  r.auth_from_overlay = j.value("auth_from_overlay", false);
  return r;
}

struct HttpTransport::Connection {
  std::mutex mu;
  std::unique_ptr<httplib::Client> client;
};

HttpTransport::HttpTransport(std::chrono::milliseconds connect_timeout,
                             std::chrono::milliseconds read_timeout)
    : connect_timeout_(connect_timeout), read_timeout_(read_timeout) {}

HttpTransport::~HttpTransport() = default;

HttpResponse HttpTransport::send(const ConcreteRequest& request) {
  HttpResponse result;
  auto url = parse_url(request.url);
  if (!url) {
    result.transport_error = "bad url: " + request.url;
    return result;
  }

  std::shared_ptr<Connection> conn;
  {
    std::lock_guard lock(mu_);
    auto& slot = connections_[url->origin()];
    if (!slot) {
      slot = std::make_shared<Connection>();
      slot->client = std::make_unique<httplib::Client>(url->origin());
      slot->client->set_url_encode(false);
      slot->client->set_keep_alive(true);
      slot->client->set_tcp_nodelay(true);
      slot->client->set_connection_timeout(connect_timeout_);
      slot->client->set_read_timeout(read_timeout_);
      slot->client->set_write_timeout(read_timeout_);
    }
    conn = slot;
  }

  httplib::Request req;
  req.method = request.method;
  req.path = url->path.empty() ? "/" : url->path;
  if (!url->query.empty()) req.path += "?" + url->query;
  for (const auto& [k, v] : request.headers) req.headers.emplace(k, v);
  req.body = request.body;

  const auto start = std::chrono::steady_clock::now();
  httplib::Response res;
  httplib::Error err = httplib::Error::Success;
  bool ok = false;
  {
    std::lock_guard lock(conn->mu);
    ok = conn->client->send(req, res, err);
  }
  result.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!ok || err != httplib::Error::Success) {
    result.transport_error = httplib::to_string(err);
    return result;
  }
  result.status = res.status;
  for (const auto& [k, v] : res.headers) {
    // Hop-by-hop headers vary with connection reuse, not with the target.
    const auto lower = to_lower(k);
    if (lower == "keep-alive" || lower == "connection") continue;
    result.headers.emplace_back(k, v);
  }
  result.body = res.body;
  return result;
}

}  // namespace sbifuzz
