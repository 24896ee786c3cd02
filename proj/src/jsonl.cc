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

#include "cfx/jsonl.h"

#include <sstream>

#include "cfx/error.h"
#include "cfx/text.h"

namespace cfx {

std::string ToJsonLine(const ojson& value) {
  try {
    return value.dump();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("cannot serialize record: ") + e.what());
  }
}

void ForEachJsonLine(const std::filesystem::path& path,
                     const std::function<void(size_t, const ojson&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  ForEachJsonLine(in, path.string(), fn);
}

void ForEachJsonLine(std::istream& in, const std::string& origin,
                     const std::function<void(size_t, const ojson&)>& fn) {
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty()) continue;
    ojson record;
    try {
      record = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(origin + ":" + std::to_string(line_number) +
                      ": malformed JSON: " + e.what());
    }
    if (!record.is_object()) {
      throw DataError(origin + ":" + std::to_string(line_number) +
                      ": expected a JSON object");
    }
    fn(line_number, record);
  }
}

std::vector<ojson> ReadJsonl(const std::filesystem::path& path) {
  std::vector<ojson> out;
  ForEachJsonLine(path, [&](size_t, const ojson& r) { out.push_back(r); });
  return out;
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("io", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteJsonl(const std::filesystem::path& path,
                const std::vector<ojson>& records) {
  std::string text;
  for (const auto& r : records) {
    text += ToJsonLine(r);
    text += '\n';
  }
  WriteTextFile(path, text);
}

JsonlAppender::JsonlAppender(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw Error("io", "cannot open " + path.string() + " for append");
}

void JsonlAppender::Append(const ojson& record) {
  std::string line = ToJsonLine(record);
  std::lock_guard<std::mutex> lock(mu_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw Error("io", "append failed for " + path_.string());
}

}  // namespace cfx
