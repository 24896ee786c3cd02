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

#ifndef CFX_RECORDS_H_
#define CFX_RECORDS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cfx/corpus.h"
#include "cfx/jsonl.h"

namespace cfx {

enum class ParseStatus { kOk, kTemplateViolation, kRefusal, kTransportFailure };

std::string_view ParseStatusName(ParseStatus status);
std::optional<ParseStatus> ParseParseStatus(std::string_view name);

// One generation attempt for a (factual, target label, edited field) triple.
// Human counterfactuals use the same shape with generator "human".
struct CounterfactualRecord {
  std::string cf_id;
  std::string factual_id;
  std::string generator;
  std::string target_label;
  Field edited_field = Field::kText;
  // The new value of the edited field (x'). Empty unless parse_status is ok.
  std::string text;
  // PairText only: the untouched field, copied verbatim from the factual.
  std::string counterpart;
  ParseStatus parse_status = ParseStatus::kOk;
  std::string raw_response;

  bool ok() const { return parse_status == ParseStatus::kOk; }
};

ojson ToJson(const CounterfactualRecord& record);
// Throws DataError (prefixed with `where`) on a malformed record.
CounterfactualRecord CfRecordFromJson(const ojson& json,
                                      const std::string& where);

std::vector<CounterfactualRecord> LoadCfRecords(
    const std::filesystem::path& path);
void WriteCfRecords(const std::filesystem::path& path,
                    const std::vector<CounterfactualRecord>& records);

// All attempts of one generator over one dataset split, including failures.
struct GenerationRun {
  std::string run_id;
  std::string generator;
  std::string dataset;
  // "text" for SingleText, otherwise the edited pair field.
  Field edited_field = Field::kText;
  uint64_t seed = 0;
  std::vector<CounterfactualRecord> records;
};

// Full (premise, hypothesis) of a PairText counterfactual: the edited field
// replaced by the counterfactual text, the other kept from the factual.
std::pair<std::string, std::string> PairAfterEdit(
    const FactualInstance& factual, const CounterfactualRecord& cf);

}  // namespace cfx

#endif  // CFX_RECORDS_H_
