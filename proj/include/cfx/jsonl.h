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

#ifndef CFX_JSONL_H_
#define CFX_JSONL_H_

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace cfx {

using ojson = nlohmann::ordered_json;

// Compact single-line rendering; UTF-8 passes through unescaped.
std::string ToJsonLine(const ojson& value);

// Invokes `fn(line_number, record)` for every non-blank line (1-based line
// numbers). Parse failures throw DataError naming the file and line.
void ForEachJsonLine(
    const std::filesystem::path& path,
    const std::function<void(size_t, const ojson&)>& fn);
void ForEachJsonLine(
    std::istream& in, const std::string& origin,
    const std::function<void(size_t, const ojson&)>& fn);

std::vector<ojson> ReadJsonl(const std::filesystem::path& path);

// Rewrites `path` with the given records via a temporary file and rename.
void WriteJsonl(const std::filesystem::path& path,
                const std::vector<ojson>& records);

void WriteTextFile(const std::filesystem::path& path, const std::string& text);
std::string ReadTextFile(const std::filesystem::path& path);

// Append-only writer; each Append is flushed so an interrupted run keeps
// every completed line. Thread-safe.
class JsonlAppender {
 public:
  explicit JsonlAppender(const std::filesystem::path& path);
  void Append(const ojson& record);

 private:
  std::mutex mu_;
  std::ofstream out_;
  std::filesystem::path path_;
};

}  // namespace cfx

#endif  // CFX_JSONL_H_
