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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sbifuzz/detector.hpp"
#include "sbifuzz/http.hpp"
#include "sbifuzz/spec_loader.hpp"

namespace sbifuzz {

struct ReplayOptions {
  // nf -> origin ("http://127.0.0.1:9000"); wins over the recorded origin.
  std::map<std::string, std::string> origins;
  std::optional<std::string> token_endpoint;
};

// Origins for every NF in a host map.
std::map<std::string, std::string> origins_from(const HostMap& hosts);

struct ReplayOutcome {
  bool reproduced = false;
  std::optional<BugClass> observed_class;
  int observed_status = 0;
  std::vector<ExecutedExchange> exchanges;
  std::string message;

  Json to_json() const;
};

// Re-sends the recorded steps, re-binding handles from the fresh responses.
// Reproduced iff the final exchange classifies to the expected class with
// the expected status. Throws kTokenAcquisitionFailed.
ReplayOutcome replay(const ReplayDocument& doc, const ReplayOptions& options,
                     std::shared_ptr<Transport> transport = nullptr);

ReplayOutcome replay_file(const std::filesystem::path& path, const ReplayOptions& options,
                          std::shared_ptr<Transport> transport = nullptr);

}  // namespace sbifuzz
