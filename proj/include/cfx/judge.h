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

// LLM-as-judge protocol: 1-4 scoring of counterfactuals against honest or
// corrupted labels, label classification of NLI counterfactuals, score
// distributions and the copy-paste detector.

#ifndef CFX_JUDGE_H_
#define CFX_JUDGE_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfx/corpus.h"
#include "cfx/jsonl.h"
#include "cfx/providers.h"
#include "cfx/records.h"

namespace cfx {

enum class Aspect { kFL, kUA, kRS };

std::string_view AspectName(Aspect aspect);
std::optional<Aspect> ParseAspect(std::string_view name);
// "FL,UA,RS" in any order, no duplicates. Throws InvalidArgument.
std::vector<Aspect> ParseAspects(std::string_view list);

enum class JudgeMode { kHonest, kCorrupted, kClassify };

std::string_view JudgeModeName(JudgeMode mode);
std::optional<JudgeMode> ParseJudgeMode(std::string_view name);

struct JudgeScore {
  std::optional<int> fl;
  std::optional<int> ua;
  std::optional<int> rs;

  std::optional<int> Get(Aspect aspect) const;
  void Set(Aspect aspect, int value);
};

enum class JudgeStatus { kOk, kParseFailure, kRefusal, kTransportFailure };

std::string_view JudgeStatusName(JudgeStatus status);
std::optional<JudgeStatus> ParseJudgeStatus(std::string_view name);

struct JudgeRecord {
  std::string cf_id;
  std::string judge_model;
  JudgeMode mode = JudgeMode::kHonest;
  std::string shown_label;  // empty in classify mode
  std::string target_label;  // the counterfactual's y'
  std::vector<Aspect> aspects;
  JudgeScore scores;
  std::string predicted_label;  // classify mode only
  JudgeStatus parse_status = JudgeStatus::kOk;
  std::string raw_response;

  bool ok() const { return parse_status == JudgeStatus::kOk; }
};

ojson ToJson(const JudgeRecord& record);
JudgeRecord JudgeRecordFromJson(const ojson& j, const std::string& where);
std::vector<JudgeRecord> LoadJudgeRecords(const std::filesystem::path& path);
void WriteJudgeRecords(const std::filesystem::path& path,
                       const std::vector<JudgeRecord>& records);

// Wrong label shown on the corrupted set. Three labels: the one that is
// neither factual nor target. Two labels: the one that is not the target.
// More labels: a seeded uniform pick among those outside {factual, target}.
std::string CorruptLabel(const Task& task, const std::string& factual_label,
                         const std::string& target_label, uint64_t seed);

struct JudgeTemplate {
  std::string version;
  std::string score_instruction;
  std::map<Aspect, std::string> aspect_descriptions;
  std::string answer_instruction;
  std::string original_line;  // {original}
  std::string counterfactual_line;  // {counterfactual}
  std::string label_line;  // {label}
  std::string pair_rendering;  // {premise}, {hypothesis}
  std::string classify_instruction;  // {labels}
  std::map<Aspect, std::string> score_markers;

  static JudgeTemplate Default();
  static JudgeTemplate FromConfig(const nlohmann::json& cfg);
  static JudgeTemplate Load(const std::filesystem::path& path);
};

std::string BuildJudgePrompt(const JudgeTemplate& tmpl, const Task& task,
                             const FactualInstance& factual,
                             const CounterfactualRecord& cf,
                             const std::string& shown_label,
                             const std::vector<Aspect>& aspects);
std::string BuildClassifyPrompt(const JudgeTemplate& tmpl, const Task& task,
                                const FactualInstance& factual,
                                const CounterfactualRecord& cf);

// Every requested aspect must appear as "<marker> <int>" with the integer in
// 1..4. The last marker occurrence followed by an integer wins.
std::optional<JudgeScore> ParseScores(const JudgeTemplate& tmpl,
                                      const std::string& response,
                                      const std::vector<Aspect>& aspects);
// Whole answer after trim, case-fold and punctuation stripping; failing that,
// a single distinct label word in the answer.
std::optional<std::string> ParseClassifiedLabel(const Task& task,
                                                const std::string& response);

JudgeRecord JudgeCf(ChatProvider& chat, const JudgeTemplate& tmpl, const Task& task,
                    const FactualInstance& factual, const CounterfactualRecord& cf,
                    const std::string& shown_label, JudgeMode mode,
                    const std::vector<Aspect>& aspects);
JudgeRecord ClassifyCf(ChatProvider& chat, const JudgeTemplate& tmpl,
                       const Task& task, const FactualInstance& factual,
                       const CounterfactualRecord& cf);

struct JudgeOptions {
  JudgeMode mode = JudgeMode::kHonest;
  std::vector<Aspect> aspects = {Aspect::kFL, Aspect::kUA, Aspect::kRS};
  uint64_t seed = 0;
};

// Label shown to the judge for one counterfactual.
std::string ShownLabel(const JudgeOptions& options, const Task& task,
                       const FactualInstance& factual, const CounterfactualRecord& cf);

// Judges every ok record (cf_id order). Records already present in
// `existing` are reused; fresh ones are passed to `on_new_record`.
std::vector<JudgeRecord> RunJudge(
    const JudgeOptions& options, const Task& task, const FactualLookup& factuals,
    const std::vector<CounterfactualRecord>& cfs, ChatProvider& chat,
    const JudgeTemplate& tmpl, const std::vector<JudgeRecord>& existing = {},
    const std::function<void(const JudgeRecord&)>& on_new_record = {});

struct ScoreDistribution {
  std::array<double, 4> pct = {0, 0, 0, 0};  // scores 1..4
  double pct_12 = 0;
  double pct_34 = 0;
  double avg = 0;
  size_t n_parsed = 0;
  size_t n_failed = 0;
};

// Over records whose aspect was parsed. Throws InvalidArgument when none was.
ScoreDistribution ComputeScoreDistribution(const std::vector<JudgeRecord>& records,
                                           Aspect aspect);
ScoreDistribution AverageDistributions(const ScoreDistribution& a,
                                       const ScoreDistribution& b);

struct ClassifyAccuracy {
  std::optional<double> accuracy;
  size_t n_correct = 0;
  size_t n_parsed = 0;
  size_t n_failed = 0;
};

ClassifyAccuracy ComputeClassifyAccuracy(const std::vector<JudgeRecord>& records);

// PairText ok records only: the new field equals the untouched one after
// whitespace collapse and case-fold.
bool DetectCopyPaste(const FactualInstance& factual, const CounterfactualRecord& cf);

struct CopyPasteSummary {
  size_t n_checked = 0;
  size_t n_copy = 0;
  std::optional<double> pct;
  std::vector<std::string> copy_ids;
};

CopyPasteSummary CopyPasteRate(const FactualLookup& factuals,
                               const std::vector<CounterfactualRecord>& cfs);

// True when the judge and generator are the same model (case-insensitive).
bool IsSelfJudging(std::string_view judge_model, std::string_view generator_model);

}  // namespace cfx

#endif  // CFX_JUDGE_H_
