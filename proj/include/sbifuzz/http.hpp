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

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sbifuzz/util.hpp"

namespace sbifuzz {

using Headers = std::vector<std::pair<std::string, std::string>>;

std::optional<std::string> find_header(const Headers& headers, std::string_view name);
void set_header(Headers& headers, const std::string& name, const std::string& value);
void remove_header(Headers& headers, std::string_view name);

// Enough to re-derive a request byte-for-byte from the grammar.
struct Provenance {
  std::string template_id;
  std::string mutation = "explore";  // "explore", "canonical", "<checker>:<detail>"
  std::vector<std::uint32_t> choices;  // decision tape consumed by instantiation
  std::uint64_t rng_seed = 0;
  int variant_index = -1;  // checker variant ordinal, -1 for none
  std::map<std::string, std::string> bindings;  // path slots filled from earlier responses

  Json to_json() const;
  static Provenance from_json(const Json& j);
};

struct ConcreteRequest {
  std::string method;
  std::string url;  // absolute, query included
  Headers headers;
  std::string body;
  Provenance provenance;
  bool auth_from_overlay = false;

  std::string query() const;
  std::optional<std::string> header(std::string_view name) const {
    return find_header(headers, name);
  }
  // Canonical wire-ish form used for equality and logs.
  std::string bytes() const;

  Json to_json() const;
  static ConcreteRequest from_json(const Json& j);
};

struct HttpResponse {
  int status = 0;
  Headers headers;
  std::string body;
  std::optional<std::string> transport_error;
  double latency_ms = 0;

  bool failed() const { return transport_error.has_value(); }
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse send(const ConcreteRequest& request) = 0;
};

// HTTP/1.1 over TCP, one keep-alive connection per origin.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::chrono::milliseconds connect_timeout = std::chrono::milliseconds(1000),
                         std::chrono::milliseconds read_timeout = std::chrono::milliseconds(5000));
  ~HttpTransport() override;

  HttpResponse send(const ConcreteRequest& request) override;

 private:
  struct Connection;
  std::chrono::milliseconds connect_timeout_;
  std::chrono::milliseconds read_timeout_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Connection>> connections_;
};

class CallbackTransport : public Transport {
 public:
  using Handler = std::function<HttpResponse(const ConcreteRequest&)>;
  explicit CallbackTransport(Handler handler) : handler_(std::move(handler)) {}
  HttpResponse send(const ConcreteRequest& request) override { return handler_(request); }

 private:
  Handler handler_;
};

}  // namespace sbifuzz
