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

#include "cfx/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "cfx/error.h"
#include "cfx/text.h"

namespace cfx {
namespace {

using nlohmann::json;

class Parser {
 public:
  Parser(std::string_view text, std::string origin)
      : text_(text), origin_(std::move(origin)) {}

  json Run() {
    json root = json::object();
    json* table = &root;
    while (!AtEnd()) {
      SkipBlankAndComments();
      if (AtEnd()) break;
      if (Peek() == '[') {
        table = ParseHeader(root);
      } else {
        ParseKeyValue(*table);
      }
    }
    return root;
  }

 private:
  [[noreturn]] void Fail(const std::string& what) const {
    throw ConfigError(origin_ + ":" + std::to_string(line_) + ": " + what);
  }

  bool AtEnd() const { return pos_ >= text_.size(); }
  char Peek() const { return AtEnd() ? '\0' : text_[pos_]; }
  char Next() {
    char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void SkipInlineSpace() {
    while (!AtEnd() && (Peek() == ' ' || Peek() == '\t')) Next();
  }

  void SkipComment() {
    if (Peek() == '#') {
      while (!AtEnd() && Peek() != '\n') Next();
    }
  }

  void SkipBlankAndComments() {
    while (!AtEnd()) {
      char c = Peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        Next();
      } else if (c == '#') {
        SkipComment();
      } else {
        break;
      }
    }
  }

  void ExpectLineEnd() {
    SkipInlineSpace();
    SkipComment();
    if (Peek() == '\r') Next();
    if (AtEnd()) return;
    if (Peek() != '\n') Fail("unexpected trailing characters");
    Next();
  }

  static bool IsBareKeyChar(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c == '-';
  }

  std::vector<std::string> ParseKeyPath() {
    std::vector<std::string> parts;
    while (true) {
      SkipInlineSpace();
      if (Peek() == '"' || Peek() == '\'') {
        parts.push_back(ParseString());
      } else {
        std::string key;
        while (!AtEnd() && IsBareKeyChar(Peek())) key.push_back(Next());
        if (key.empty()) Fail("expected a key");
        parts.push_back(std::move(key));
      }
      SkipInlineSpace();
      if (Peek() != '.') return parts;
      Next();
    }
  }

  json* Descend(json& root, const std::vector<std::string>& path) {
    json* node = &root;
    for (const auto& part : path) {
      json& child = (*node)[part];
      if (child.is_null()) child = json::object();
      if (!child.is_object()) Fail("key '" + part + "' is not a table");
      node = &child;
    }
    return node;
  }

  json* ParseHeader(json& root) {
    Next();  // '['
    if (Peek() == '[') Fail("arrays of tables are not supported");
    std::vector<std::string> path = ParseKeyPath();
    if (Peek() != ']') Fail("expected ']' to close table header");
    Next();
    std::string joined = Join(path, ".");
    if (!headers_.insert(joined).second) Fail("duplicate table [" + joined + "]");
    json* table = Descend(root, path);
    ExpectLineEnd();
    return table;
  }

  void ParseKeyValue(json& table) {
    std::vector<std::string> path = ParseKeyPath();
    if (Peek() != '=') Fail("expected '=' after key");
    Next();
    SkipInlineSpace();
    std::string leaf = path.back();
    path.pop_back();
    json* target = Descend(table, path);
    if (target->contains(leaf)) Fail("duplicate key '" + leaf + "'");
    (*target)[leaf] = ParseValue();
    ExpectLineEnd();
  }

  json ParseValue() {
    char c = Peek();
    if (c == '"' || c == '\'') return ParseString();
    if (c == '[') return ParseArray();
    if (c == '{') Fail("inline tables are not supported");
    return ParseScalarToken();
  }

  json ParseArray() {
    Next();  // '['
    json arr = json::array();
    while (true) {
      SkipBlankAndComments();
      if (AtEnd()) Fail("unterminated array");
      if (Peek() == ']') {
        Next();
        return arr;
      }
      if (Peek() == '[') Fail("nested arrays are not supported");
      arr.push_back(ParseValue());
      SkipBlankAndComments();
      if (Peek() == ',') {
        Next();
      } else if (Peek() != ']') {
        Fail("expected ',' or ']' in array");
      }
    }
  }

  json ParseScalarToken() {
    std::string token;
    while (!AtEnd()) {
      char c = Peek();
      if (c == ',' || c == ']' || c == '#' || c == '\n' || c == '\r' ||
          c == ' ' || c == '\t') {
        break;
      }
      token.push_back(Next());
    }
    if (token.empty()) Fail("expected a value");
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (char c : token) {
      if (c != '_') digits.push_back(c);
    }
    bool is_float = digits.find_first_of(".eE") != std::string::npos ||
                    digits == "inf" || digits == "+inf" || digits == "-inf" ||
                    digits == "nan";
    try {
      size_t used = 0;
      if (is_float) {
        double v = std::stod(digits, &used);
        if (used == digits.size()) return v;
      } else {
        long long v = std::stoll(digits, &used, 10);
        if (used == digits.size()) return static_cast<int64_t>(v);
      }
    } catch (const std::exception&) {
    }
    Fail("invalid value '" + token + "'");
  }

  std::string ParseString() {
    char quote = Next();
    bool multiline = false;
    if (Peek() == quote && pos_ + 1 < text_.size() &&
        text_[pos_ + 1] == quote) {
      Next();
      Next();
      multiline = true;
      // A newline directly after the opening delimiter is trimmed.
      if (Peek() == '\r') Next();
      if (Peek() == '\n') Next();
    }
    std::string out;
    while (true) {
      if (AtEnd()) Fail("unterminated string");
      char c = Peek();
      if (c == quote) {
        if (!multiline) {
          Next();
          return out;
        }
        if (text_.substr(pos_, 3) == std::string(3, quote)) {
          Next();
          Next();
          Next();
          return out;
        }
      }
      if (c == '\n' && !multiline) Fail("newline in single-line string");
      Next();
      if (c == '\\' && quote == '"') {
        if (AtEnd()) Fail("unterminated escape");
        char e = Next();
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          case '\n':
            // Line-ending backslash: drop the newline and leading whitespace.
            while (!AtEnd() && (Peek() == ' ' || Peek() == '\t' ||
                                Peek() == '\n' || Peek() == '\r')) {
              Next();
            }
            break;
          default: Fail(std::string("unsupported escape \\") + e);
        }
        continue;
      }
      out.push_back(c);
    }
  }

  std::string_view text_;
  std::string origin_;
  size_t pos_ = 0;
  int line_ = 1;
  std::set<std::string> headers_;
};

const json* FindTyped(const json& cfg, std::string_view path) {
  return Find(cfg, path);
}

[[noreturn]] void WrongType(std::string_view path, const char* expected) {
  throw ConfigError("config key '" + std::string(path) + "' must be " +
                    expected);
}

}  // namespace

json ParseConfig(std::string_view text, const std::string& origin) {
  return Parser(text, origin).Run();
}

json LoadConfigFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str(), path.string());
}

const json* Find(const json& cfg, std::string_view path) {
  const json* node = &cfg;
  for (const std::string& part : Split(path, '.')) {
    if (!node->is_object()) return nullptr;
    auto it = node->find(part);
    if (it == node->end()) return nullptr;
    node = &*it;
  }
  return node;
}

std::string GetString(const json& cfg, std::string_view path,
                      const std::string& fallback) {
  const json* v = FindTyped(cfg, path);
  if (v == nullptr) return fallback;
  if (!v->is_string()) WrongType(path, "a string");
  return v->get<std::string>();
}

double GetNumber(const json& cfg, std::string_view path, double fallback) {
  const json* v = FindTyped(cfg, path);
  if (v == nullptr) return fallback;
  if (!v->is_number()) WrongType(path, "a number");
  return v->get<double>();
}

int64_t GetInt(const json& cfg, std::string_view path, int64_t fallback) {
  const json* v = FindTyped(cfg, path);
  if (v == nullptr) return fallback;
  if (!v->is_number_integer()) WrongType(path, "an integer");
  return v->get<int64_t>();
}

bool GetBool(const json& cfg, std::string_view path, bool fallback) {
  const json* v = FindTyped(cfg, path);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) WrongType(path, "a boolean");
  return v->get<bool>();
}

}  // namespace cfx
