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

#ifndef CFX_GENPIPE_H_
#define CFX_GENPIPE_H_

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
#include "cfx/providers.h"
#include "cfx/records.h"
#include "cfx/retrieval.h"

namespace cfx {

struct AnswerMarkers {
  std::string step1 = "Step 1:";
  std::string step2 = "Step 2:";
  std::string counterfactual = "Counterfactual:";
};

// Prompt layout for counterfactual generation. Rendering strings use
// {placeholder} substitution (see RenderFormat):
//   demo:   {original} {label} {target} {step1_prefix} {step1} {step2_prefix}
//           {step2} {cf_prefix} {counterfactual}
//   query:  {original} {label} {target}
//   single_original: {text}
//   pair_original:   {premise} {hypothesis} {premise_role} {hypothesis_role}
struct PromptTemplate {
  std::string version;
  std::string task_instruction;
  std::array<std::string, 3> step_texts;
  std::string demo_rendering;
  std::string query_rendering;
  std::string single_original;
  std::string pair_original;
  std::string editable_role;
  std::string fixed_role;
  std::string repair_instruction;
  AnswerMarkers markers;

  // Same content as templates/generate_v1.toml.
  static PromptTemplate Default();
  // Missing keys keep their default values.
  static PromptTemplate FromConfig(const nlohmann::json& cfg);
  static PromptTemplate Load(const std::filesystem::path& path);

  // Throws ConfigError: empty step texts or cf marker, a demo rendering
  // without {cf_prefix}, or the cf marker leaking into other sections.
  void Validate() const;
};

// Replaces {name} with values.at(name); "{{" and "}}" are literal braces.
// Unknown names throw ConfigError.
std::string RenderFormat(std::string_view format,
                         const std::map<std::string, std::string>& values);

struct EditDescription {
  std::string step1;  // quoted source spans that change
  std::string step2;  // "old" -> "new" replacements
};

// Step 1/Step 2 renderings for a worked example, from a token alignment
// that groups adjacent edits into spans.
EditDescription DescribeEdits(const std::string& factual_text,
                              const std::string& counterfactual_text);

// Binary tasks flip; the entailment/neutral/contradiction set maps
// entailment -> contradiction, contradiction -> entailment,
// neutral -> entailment; other sets take the next label cyclically.
std::string DefaultTargetLabel(const Task& task, const std::string& factual_label);

// Deterministic prompt: instruction, the three steps, the worked demo with
// its answer, then the query and its target label.
std::string BuildPrompt(const PromptTemplate& tmpl, const Task& task,
                        const DemoPair& demo, const FactualInstance& query,
                        const std::string& target_label, Field edited_field);

// Trimmed text after the last `cf_prefix`, cut at the first blank line.
// Absent when the marker is missing or nothing follows it.
std::optional<std::string> ExtractCounterfactual(const std::string& response,
                                                 const std::string& cf_prefix);

std::string MakeCfId(const std::string& generator, const std::string& factual_id,
                     Field edited_field, const std::string& target_label);

// Never throws for model misbehaviour; the outcome is in parse_status. One
// repair attempt follows a template violation.
CounterfactualRecord GenerateCf(ChatProvider& chat, const PromptTemplate& tmpl,
                                const Task& task, const DemoPair& demo,
                                const FactualInstance& query,
                                const std::string& target_label, Field edited_field,
                                const std::string& generator);

// 100 * ok / all. Throws InvalidArgument on an empty run.
double SuccessRate(const GenerationRun& run);
double SuccessRate(const std::vector<CounterfactualRecord>& records);

struct GenerationOptions {
  std::string run_id;
  std::string generator;
  std::string dataset;
  Field edited_field = Field::kText;
  uint64_t seed = 0;
  // Forces this target for every factual whose label differs from it;
  // factuals already carrying it are skipped.
  std::optional<std::string> target_override;
};

struct GenerationRequest {
  const FactualInstance* factual = nullptr;
  std::string target_label;
  Field edited_field = Field::kText;
};

std::vector<GenerationRequest> PlanRequests(const Task& task, const DatasetSplit& split,
                                            const GenerationOptions& options);

// Generates one record per planned request. Records whose cf_id is already
// in `existing` are reused untouched (resume). New records are reported to
// `on_new_record` in request order as each parallel batch completes; the run
// holds all records in request order.
GenerationRun RunGeneration(const GenerationOptions& options, const Task& task,
                            const DatasetSplit& split, const EmbeddingIndex& index,
                            Embedder& embedder, ChatProvider& chat,
                            const PromptTemplate& tmpl,
                            const std::vector<CounterfactualRecord>& existing,
                            const std::function<void(const CounterfactualRecord&)>&
                                on_new_record);

}  // namespace cfx

#endif  // CFX_GENPIPE_H_
