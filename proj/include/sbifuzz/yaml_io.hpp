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

#include <string>
#include <string_view>

#include "sbifuzz/util.hpp"

namespace sbifuzz {

// Parses YAML (a JSON superset) into a JSON tree. Plain scalars are typed by
// the YAML 1.2 core schema; quoted and block scalars stay strings.
// Throws Error(kParseError).
Json parse_yaml(std::string_view text);

// Block-style YAML, 2-space indent. Strings that would re-read as another
// type are double-quoted so parse_yaml(emit_yaml(x)) == x.
std::string emit_yaml(const Json& value);

}  // namespace sbifuzz
