// Copyright 2026 The cfx Authors.
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

#ifndef CFX_CONFIG_H_
#define CFX_CONFIG_H_

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace cfx {

// Reads the structured-text config format used for run configs, task files
// and prompt templates: a TOML subset with [tables] (dotted headers allowed),
// `key = value` lines, "basic" and 'literal' strings, triple-quoted
// multi-line strings, integers, floats, booleans and (possibly multi-line)
// arrays of scalars. The result is a JSON object tree.
//
// Throws ConfigError("<origin>:<line>: ...") on malformed input.
nlohmann::json ParseConfig(std::string_view text,
                           const std::string& origin = "<config>");
nlohmann::json LoadConfigFile(const std::filesystem::path& path);

// Typed lookups with a dotted path, e.g. GetString(cfg, "task.kind").
// Missing keys yield the fallback; present keys of the wrong type throw.
std::string GetString(const nlohmann::json& cfg, std::string_view path,
                      const std::string& fallback = "");
double GetNumber(const nlohmann::json& cfg, std::string_view path,
                 double fallback);
int64_t GetInt(const nlohmann::json& cfg, std::string_view path,
               int64_t fallback);
bool GetBool(const nlohmann::json& cfg, std::string_view path, bool fallback);
const nlohmann::json* Find(const nlohmann::json& cfg, std::string_view path);

}  // namespace cfx

#endif  // CFX_CONFIG_H_
