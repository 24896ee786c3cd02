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

#include "cfx/records.h"

#include "cfx/error.h"

namespace cfx {

std::string_view ParseStatusName(ParseStatus status) {
  switch (status) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kTemplateViolation: return "template_violation";
    case ParseStatus::kRefusal: return "refusal";
    case ParseStatus::kTransportFailure: return "transport_failure";
  }
  return "ok";
}

std::optional<ParseStatus> ParseParseStatus(std::string_view name) {
  if (name == "ok") return ParseStatus::kOk;
  if (name == "template_violation") return ParseStatus::kTemplateViolation;
  if (name == "refusal") return ParseStatus::kRefusal;
  if (name == "transport_failure") return ParseStatus::kTransportFailure;
  return std::nullopt;
}

ojson ToJson(const CounterfactualRecord& r) {
  ojson out = ojson::object();
  out["cf_id"] = r.cf_id;
  out["factual_id"] = r.factual_id;
  out["generator"] = r.generator;
  out["target_label"] = r.target_label;
  out["edited_field"] = std::string(FieldName(r.edited_field));
  out["text"] = r.text;
  if (r.edited_field != Field::kText) out["counterpart"] = r.counterpart;
  out["parse_status"] = std::string(ParseStatusName(r.parse_status));
  out["raw_response"] = r.raw_response;
  return out;
}

namespace {

std::string GetStr(const ojson& j, const char* key, const std::string& where,
                   bool required) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw DataError(where + ": missing field \"" + key + "\"");
    return "";
  }
  if (!it->is_string()) {
    throw DataError(where + ": field \"" + key + "\" must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

CounterfactualRecord CfRecordFromJson(const ojson& j, const std::string& where) {
  CounterfactualRecord r;
  r.cf_id = GetStr(j, "cf_id", where, true);
  r.factual_id = GetStr(j, "factual_id", where, true);
  r.generator = GetStr(j, "generator", where, false);
  r.target_label = GetStr(j, "target_label", where, true);
  std::string field = GetStr(j, "edited_field", where, false);
  if (!field.empty()) {
    auto parsed = ParseField(field);
    if (!parsed) {
      throw DataError(where + ": unknown edited_field \"" + field + "\"");
    }
    r.edited_field = *parsed;
  }
  r.text = GetStr(j, "text", where, true);
  r.counterpart = GetStr(j, "counterpart", where, false);
  std::string status = GetStr(j, "parse_status", where, false);
  if (!status.empty()) {
    auto parsed = ParseParseStatus(status);
    if (!parsed) {
      throw DataError(where + ": unknown parse_status \"" + status + "\"");
    }
    r.parse_status = *parsed;
  }
  r.raw_response = GetStr(j, "raw_response", where, false);
  if (r.ok() && r.text.empty()) {
    throw DataError(where + ": ok record with empty text");
  }
  return r;
}

std::vector<CounterfactualRecord> LoadCfRecords(
    const std::filesystem::path& path) {
  std::vector<CounterfactualRecord> out;
  ForEachJsonLine(path, [&](size_t line, const ojson& j) {
    out.push_back(
        CfRecordFromJson(j, path.string() + ":" + std::to_string(line)));
  });
  return out;
}

void WriteCfRecords(const std::filesystem::path& path,
                    const std::vector<CounterfactualRecord>& records) {
  std::vector<ojson> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(ToJson(r));
  WriteJsonl(path, rows);
}

std::pair<std::string, std::string> PairAfterEdit(
    const FactualInstance& factual, const CounterfactualRecord& cf) {
  if (cf.edited_field == Field::kPremise) return {cf.text, factual.hypothesis};
  if (cf.edited_field == Field::kHypothesis) return {factual.premise, cf.text};
  throw InvalidArgument("counterfactual " + cf.cf_id +
                        " does not edit a pair field");
}

}  // namespace cfx
