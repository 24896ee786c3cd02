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

#ifndef CFX_CORPUS_H_
#define CFX_CORPUS_H_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cfx/jsonl.h"

namespace cfx {

enum class TaskKind { kSingleText, kPairText };

// The text field a counterfactual edits. SingleText tasks always edit kText.
enum class Field { kText, kPremise, kHypothesis };

std::string_view FieldName(Field field);
std::optional<Field> ParseField(std::string_view name);

// A classification task: its input shape and its ordered label set.
class Task {
 public:
  // Throws ConfigError on fewer than 2 labels or duplicates.
  Task(std::string name, TaskKind kind, std::vector<std::string> labels);

  // "sa" (negative, positive), "nli" (entailment, neutral, contradiction),
  // "hs" (nothate, hate).
  static Task Builtin(std::string_view name);
  // Table with keys name, kind = "single" | "pair", labels = [...].
  static Task FromConfig(const nlohmann::json& table);
  // A task file, or a builtin name when `spec` is not an existing path.
  static Task Load(const std::string& spec);

  const std::string& name() const { return name_; }
  TaskKind kind() const { return kind_; }
  bool is_pair() const { return kind_ == TaskKind::kPairText; }
  const std::vector<std::string>& labels() const { return labels_; }

  bool HasLabel(std::string_view label) const;
  std::optional<size_t> LabelIndex(std::string_view label) const;
  // Case-insensitive match against the label set; returns the canonical name.
  std::optional<std::string> MatchLabel(std::string_view label) const;

 private:
  std::string name_;
  TaskKind kind_;
  std::vector<std::string> labels_;
};

struct FactualInstance {
  std::string id;
  std::string text;  // SingleText
  std::string premise;  // PairText
  std::string hypothesis;  // PairText
  std::string label;

  const std::string& FieldText(Field field) const;
};

enum class SplitName { kTrain, kValidation, kTest };

std::string_view SplitNameString(SplitName name);
std::optional<SplitName> ParseSplitName(std::string_view name);

struct DatasetSplit {
  SplitName name = SplitName::kTest;
  std::vector<FactualInstance> instances;
};

// Id -> instance view over a split; the split must outlive the lookup.
class FactualLookup {
 public:
  explicit FactualLookup(const DatasetSplit& split);
  const FactualInstance* Find(std::string_view id) const;

 private:
  std::unordered_map<std::string, const FactualInstance*> by_id_;
};

// Loads a factual JSONL file. The whole file is validated before anything is
// returned; the first problem throws DataError naming the line.
DatasetSplit LoadDataset(const std::filesystem::path& path, const Task& task,
                         SplitName name = SplitName::kTest);
DatasetSplit ParseDataset(std::istream& in, const std::string& origin,
                          const Task& task, SplitName name = SplitName::kTest);

ojson InstanceToJson(const FactualInstance& instance, const Task& task);
std::string SerializeDataset(const DatasetSplit& split, const Task& task);
void WriteDataset(const std::filesystem::path& path, const DatasetSplit& split,
                  const Task& task);

// Throws DataError if any id appears in more than one split.
void CheckDisjointSplits(const std::vector<const DatasetSplit*>& splits);

struct CounterfactualRecord;

struct PairingViolation {
  std::string cf_id;
  std::string message;
};

// Every counterfactual must reference an existing factual and carry a target
// label from the label set that differs from the factual's label.
std::vector<PairingViolation> ValidatePairing(
    const Task& task, const DatasetSplit& factuals,
    const std::vector<CounterfactualRecord>& cfs);

}  // namespace cfx

#endif  // CFX_CORPUS_H_
