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

#include "cfx/corpus.h"

#include <fstream>
#include <set>
#include <sstream>

#include "cfx/config.h"
#include "cfx/error.h"
#include "cfx/records.h"
#include "cfx/text.h"

namespace cfx {

std::string_view FieldName(Field field) {
  switch (field) {
    case Field::kText: return "text";
    case Field::kPremise: return "premise";
    case Field::kHypothesis: return "hypothesis";
  }
  return "text";
}

std::optional<Field> ParseField(std::string_view name) {
  if (name == "text") return Field::kText;
  if (name == "premise") return Field::kPremise;
  if (name == "hypothesis") return Field::kHypothesis;
  return std::nullopt;
}

Task::Task(std::string name, TaskKind kind, std::vector<std::string> labels)
    : name_(std::move(name)), kind_(kind), labels_(std::move(labels)) {
  if (labels_.size() < 2) {
    throw ConfigError("task '" + name_ + "' needs at least 2 labels");
  }
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw ConfigError("task '" + name_ + "' has an empty label");
    if (!seen.insert(CaseFold(l)).second) {
      throw ConfigError("task '" + name_ + "' has duplicate label '" + l + "'");
    }
  }
}

Task Task::Builtin(std::string_view name) {
  if (name == "sa") {
    return Task("sa", TaskKind::kSingleText, {"negative", "positive"});
  }
  if (name == "nli") {
    return Task("nli", TaskKind::kPairText,
                {"entailment", "neutral", "contradiction"});
  }
  if (name == "hs") {
    return Task("hs", TaskKind::kSingleText, {"nothate", "hate"});
  }
  throw ConfigError("unknown builtin task '" + std::string(name) + "'");
}

Task Task::FromConfig(const nlohmann::json& table) {
  std::string name = GetString(table, "name", "task");
  std::string kind = GetString(table, "kind", "single");
  TaskKind task_kind;
  if (kind == "single") {
    task_kind = TaskKind::kSingleText;
  } else if (kind == "pair") {
    task_kind = TaskKind::kPairText;
  } else {
    throw ConfigError("task kind must be \"single\" or \"pair\", got \"" +
                      kind + "\"");
  }
  const nlohmann::json* labels = Find(table, "labels");
  if (labels == nullptr || !labels->is_array()) {
    throw ConfigError("task '" + name + "' needs a labels array");
  }
  std::vector<std::string> names;
  for (const auto& l : *labels) {
    if (!l.is_string()) throw ConfigError("task labels must be strings");
    names.push_back(l.get<std::string>());
  }
  return Task(std::move(name), task_kind, std::move(names));
}

Task Task::Load(const std::string& spec) {
  if (std::filesystem::exists(spec)) {
    nlohmann::json cfg = LoadConfigFile(spec);
    const nlohmann::json* table = Find(cfg, "task");
    return FromConfig(table != nullptr ? *table : cfg);
  }
  return Builtin(spec);
}

bool Task::HasLabel(std::string_view label) const {
  return LabelIndex(label).has_value();
}

std::optional<size_t> Task::LabelIndex(std::string_view label) const {
  for (size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

std::optional<std::string> Task::MatchLabel(std::string_view label) const {
  std::string folded = CaseFold(Trim(label));
  for (const auto& l : labels_) {
    if (CaseFold(l) == folded) return l;
  }
  return std::nullopt;
}

const std::string& FactualInstance::FieldText(Field field) const {
  switch (field) {
    case Field::kPremise: return premise;
    case Field::kHypothesis: return hypothesis;
    case Field::kText: break;
  }
  return text;
}

std::string_view SplitNameString(SplitName name) {
  switch (name) {
    case SplitName::kTrain: return "train";
    case SplitName::kValidation: return "validation";
    case SplitName::kTest: return "test";
  }
  return "test";
}

std::optional<SplitName> ParseSplitName(std::string_view name) {
  if (name == "train") return SplitName::kTrain;
  if (name == "validation") return SplitName::kValidation;
  if (name == "test") return SplitName::kTest;
  return std::nullopt;
}

FactualLookup::FactualLookup(const DatasetSplit& split) {
  for (const auto& inst : split.instances) by_id_[inst.id] = &inst;
}

const FactualInstance* FactualLookup::Find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : it->second;
}

namespace {

std::string RequireString(const ojson& record, const char* key,
                          const std::string& where) {
  auto it = record.find(key);
  if (it == record.end()) {
    throw DataError(where + ": missing field \"" + key + "\"");
  }
  if (!it->is_string()) {
    throw DataError(where + ": field \"" + key + "\" must be a string");
  }
  std::string value = it->get<std::string>();
  if (Trim(value).empty()) {
    throw DataError(where + ": field \"" + key + "\" is empty");
  }
  return value;
}

}  // namespace

DatasetSplit ParseDataset(std::istream& in, const std::string& origin,
                          const Task& task, SplitName name) {
  DatasetSplit split;
  split.name = name;
  std::set<std::string> ids;
  ForEachJsonLine(in, origin, [&](size_t line, const ojson& record) {
    std::string where = origin + ":" + std::to_string(line);
    FactualInstance inst;
    inst.id = RequireString(record, "id", where);
    if (task.is_pair()) {
      inst.premise = RequireString(record, "premise", where);
      inst.hypothesis = RequireString(record, "hypothesis", where);
    } else {
      inst.text = RequireString(record, "text", where);
    }
    inst.label = RequireString(record, "label", where);
    if (!task.HasLabel(inst.label)) {
      throw DataError(where + ": unknown label \"" + inst.label +
                      "\" for task " + task.name());
    }
    if (!ids.insert(inst.id).second) {
      throw DataError(where + ": duplicate id \"" + inst.id + "\"");
    }
    split.instances.push_back(std::move(inst));
  });
  return split;
}

DatasetSplit LoadDataset(const std::filesystem::path& path, const Task& task,
                         SplitName name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return ParseDataset(in, path.string(), task, name);
}

ojson InstanceToJson(const FactualInstance& instance, const Task& task) {
  ojson out = ojson::object();
  out["id"] = instance.id;
  if (task.is_pair()) {
    out["premise"] = instance.premise;
    out["hypothesis"] = instance.hypothesis;
  } else {
    out["text"] = instance.text;
  }
  out["label"] = instance.label;
  return out;
}

std::string SerializeDataset(const DatasetSplit& split, const Task& task) {
  std::string out;
  for (const auto& inst : split.instances) {
    out += ToJsonLine(InstanceToJson(inst, task));
    out += '\n';
  }
  return out;
}

void WriteDataset(const std::filesystem::path& path, const DatasetSplit& split,
                  const Task& task) {
  WriteTextFile(path, SerializeDataset(split, task));
}

void CheckDisjointSplits(const std::vector<const DatasetSplit*>& splits) {
  std::unordered_map<std::string, SplitName> owner;
  for (const DatasetSplit* split : splits) {
    for (const auto& inst : split->instances) {
      auto [it, inserted] = owner.emplace(inst.id, split->name);
      if (!inserted) {
        throw DataError("id \"" + inst.id + "\" appears in both " +
                        std::string(SplitNameString(it->second)) + " and " +
                        std::string(SplitNameString(split->name)));
      }
    }
  }
}

std::vector<PairingViolation> ValidatePairing(
    const Task& task, const DatasetSplit& factuals,
    const std::vector<CounterfactualRecord>& cfs) {
  FactualLookup lookup(factuals);
  std::vector<PairingViolation> violations;
  for (const auto& cf : cfs) {
    const FactualInstance* f = lookup.Find(cf.factual_id);
    if (f == nullptr) {
      violations.push_back(
          {cf.cf_id, "references unknown factual id \"" + cf.factual_id + "\""});
      continue;
    }
    if (!task.HasLabel(cf.target_label)) {
      violations.push_back(
          {cf.cf_id, "target label \"" + cf.target_label + "\" not in label set"});
    } else if (cf.target_label == f->label) {
      violations.push_back(
          {cf.cf_id, "target label equals factual label \"" + f->label + "\""});
    }
  }
  return violations;
}

}  // namespace cfx
