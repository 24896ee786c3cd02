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

#include "cfx/genpipe.h"

#include <algorithm>
#include <unordered_map>

#include "cfx/config.h"
#include "cfx/error.h"
#include "cfx/metrics.h"
#include "cfx/parallel.h"
#include "cfx/text.h"

namespace cfx {

PromptTemplate PromptTemplate::Default() {
  PromptTemplate t;
  t.version = "generate-v1";
  t.task_instruction =
      "You are given a text and its label. Make minimal changes to the text so "
      "that its label becomes the target label. Follow the steps below, and "
      "answer in exactly the same format as the example.";
  t.step_texts = {
      "Identify all of the important words that contribute to flipping the label.",
      "Find replacements for the words identified in Step 1 that lead to the "
      "target label.",
      "Replace the words from Step 2 in the original text to obtain the "
      "counterfactual instance.",
  };
  t.demo_rendering =
      "Example:\n"
      "{original}\n"
      "Label: {label}\n"
      "Target label: {target}\n"
      "{step1_prefix} {step1}\n"
      "{step2_prefix} {step2}\n"
      "{cf_prefix} {counterfactual}";
  t.query_rendering =
      "Now it is your turn.\n"
      "{original}\n"
      "Label: {label}\n"
      "Target label: {target}";
  t.single_original = "Text: {text}";
  t.pair_original =
      "Premise ({premise_role}): {premise}\n"
      "Hypothesis ({hypothesis_role}): {hypothesis}";
  t.editable_role = "edit this";
  t.fixed_role = "keep unchanged";
  t.repair_instruction = "Answer using the exact template.";
  return t;
}

PromptTemplate PromptTemplate::FromConfig(const nlohmann::json& cfg) {
  PromptTemplate t = Default();
  t.version = GetString(cfg, "version", t.version);
  t.task_instruction = GetString(cfg, "task_instruction", t.task_instruction);
  if (const auto* steps = Find(cfg, "steps")) {
    if (!steps->is_array() || steps->size() != 3) {
      throw ConfigError("template 'steps' must be an array of exactly 3 strings");
    }
    for (size_t i = 0; i < 3; ++i) t.step_texts[i] = (*steps)[i].get<std::string>();
  }
  t.demo_rendering = GetString(cfg, "render.demo", t.demo_rendering);
  t.query_rendering = GetString(cfg, "render.query", t.query_rendering);
  t.single_original = GetString(cfg, "render.single_original", t.single_original);
  t.pair_original = GetString(cfg, "render.pair_original", t.pair_original);
  t.editable_role = GetString(cfg, "render.editable_role", t.editable_role);
  t.fixed_role = GetString(cfg, "render.fixed_role", t.fixed_role);
  t.repair_instruction = GetString(cfg, "repair_instruction", t.repair_instruction);
  t.markers.step1 = GetString(cfg, "markers.step1", t.markers.step1);
  t.markers.step2 = GetString(cfg, "markers.step2", t.markers.step2);
  t.markers.counterfactual =
      GetString(cfg, "markers.counterfactual", t.markers.counterfactual);
  t.Validate();
  return t;
}

PromptTemplate PromptTemplate::Load(const std::filesystem::path& path) {
  return FromConfig(LoadConfigFile(path));
}

void PromptTemplate::Validate() const {
  const std::string& cf = markers.counterfactual;
  if (Trim(cf).empty()) throw ConfigError("template counterfactual marker is empty");
  for (size_t i = 0; i < step_texts.size(); ++i) {
    if (Trim(step_texts[i]).empty()) {
      throw ConfigError("template step " + std::to_string(i + 1) + " is empty");
    }
    if (step_texts[i].find(cf) != std::string::npos) {
      throw ConfigError("template step " + std::to_string(i + 1) +
                        " contains the counterfactual marker");
    }
  }
  if (demo_rendering.find("{cf_prefix}") == std::string::npos) {
    throw ConfigError("template demo rendering lacks {cf_prefix}");
  }
  for (const std::string* s : {&task_instruction, &query_rendering, &single_original,
                               &pair_original, &demo_rendering}) {
    if (s->find(cf) != std::string::npos) {
      throw ConfigError("template text contains the literal counterfactual marker \"" +
                        cf + "\"; use {cf_prefix}");
    }
  }
}

std::string RenderFormat(std::string_view format,
                         const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(format.size());
  for (size_t i = 0; i < format.size(); ++i) {
    char c = format[i];
    if (c == '{' && i + 1 < format.size() && format[i + 1] == '{') {
      out.push_back('{');
      ++i;
    } else if (c == '}' && i + 1 < format.size() && format[i + 1] == '}') {
      out.push_back('}');
      ++i;
    } else if (c == '{') {
      size_t close = format.find('}', i);
      if (close == std::string_view::npos) throw ConfigError("unclosed '{' in template");
      std::string name(format.substr(i + 1, close - i - 1));
      auto it = values.find(name);
      if (it == values.end()) {
        throw ConfigError("unknown template placeholder {" + name + "}");
      }
      out += it->second;
      i = close;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

EditDescription DescribeEdits(const std::string& factual_text,
                              const std::string& counterfactual_text) {
  auto a = SplitWhitespace(factual_text);
  auto b = SplitWhitespace(counterfactual_text);
  auto ops = AlignTokens(a, b);
  std::vector<std::string> sources;
  std::vector<std::string> replacements;
  size_t i = 0;
  while (i < ops.size()) {
    if (ops[i].kind == EditKind::kKeep) {
      ++i;
      continue;
    }
    std::vector<std::string> from;
    std::vector<std::string> to;
    while (i < ops.size() && ops[i].kind != EditKind::kKeep) {
      if (!ops[i].from.empty()) from.push_back(ops[i].from);
      if (!ops[i].to.empty()) to.push_back(ops[i].to);
      ++i;
    }
    std::string from_span = Join(from, " ");
    if (!from_span.empty()) sources.push_back("\"" + from_span + "\"");
    replacements.push_back("\"" + from_span + "\" -> \"" + Join(to, " ") + "\"");
  }
  EditDescription d;
  d.step1 = sources.empty() ? "(none)" : Join(sources, ", ");
  d.step2 = replacements.empty() ? "(none)" : Join(replacements, ", ");
  return d;
}

std::string DefaultTargetLabel(const Task& task, const std::string& factual_label) {
  const auto& labels = task.labels();
  auto idx = task.LabelIndex(factual_label);
  if (!idx) throw InvalidArgument("label \"" + factual_label + "\" not in task");
  if (labels.size() == 2) return labels[1 - *idx];
  if (task.HasLabel("entailment") && task.HasLabel("neutral") &&
      task.HasLabel("contradiction") && labels.size() == 3) {
    if (factual_label == "entailment") return "contradiction";
    return "entailment";
  }
  return labels[(*idx + 1) % labels.size()];
}

namespace {

void CheckField(const Task& task, Field edited_field) {
  if (task.is_pair() && edited_field == Field::kText) {
    throw InvalidArgument("pair task needs edited field premise or hypothesis");
  }
  if (!task.is_pair() && edited_field != Field::kText) {
    throw InvalidArgument("single-text task can only edit \"text\"");
  }
}

std::string RenderOriginal(const PromptTemplate& t, const Task& task,
                           const FactualInstance& inst, Field edited_field) {
  if (!task.is_pair()) return RenderFormat(t.single_original, {{"text", inst.text}});
  bool premise_editable = edited_field == Field::kPremise;
  return RenderFormat(
      t.pair_original,
      {{"premise", inst.premise},
       {"hypothesis", inst.hypothesis},
       {"premise_role", premise_editable ? t.editable_role : t.fixed_role},
       {"hypothesis_role", premise_editable ? t.fixed_role : t.editable_role}});
}

}  // namespace

std::string BuildPrompt(const PromptTemplate& tmpl, const Task& task,
                        const DemoPair& demo, const FactualInstance& query,
                        const std::string& target_label, Field edited_field) {
  CheckField(task, edited_field);
  CheckField(task, demo.edited_field);
  if (!task.HasLabel(target_label) || target_label == query.label) {
    throw InvalidArgument("target label \"" + target_label + "\" is not a flip of \"" +
                          query.label + "\"");
  }
  EditDescription edits =
      DescribeEdits(demo.factual.FieldText(demo.edited_field), demo.counterfactual_text);
  std::string out = tmpl.task_instruction;
  out += "\n";
  for (size_t i = 0; i < tmpl.step_texts.size(); ++i) {
    out += "Step " + std::to_string(i + 1) + ": " + tmpl.step_texts[i] + "\n";
  }
  out += "\n";
  out += RenderFormat(tmpl.demo_rendering,
                      {{"original", RenderOriginal(tmpl, task, demo.factual, demo.edited_field)},
                       {"label", demo.factual.label},
                       {"target", demo.target_label},
                       {"step1_prefix", tmpl.markers.step1},
                       {"step1", edits.step1},
                       {"step2_prefix", tmpl.markers.step2},
                       {"step2", edits.step2},
                       {"cf_prefix", tmpl.markers.counterfactual},
                       {"counterfactual", demo.counterfactual_text}});
  out += "\n\n";
  out += RenderFormat(tmpl.query_rendering,
                      {{"original", RenderOriginal(tmpl, task, query, edited_field)},
                       {"label", query.label},
                       {"target", target_label}});
  out += "\n";
  return out;
}

std::optional<std::string> ExtractCounterfactual(const std::string& response,
                                                 const std::string& cf_prefix) {
  size_t pos = response.rfind(cf_prefix);
  if (pos == std::string::npos) return std::nullopt;
  std::string_view rest = std::string_view(response).substr(pos + cf_prefix.size());
  // Cut at the first blank line.
  size_t cut = std::string_view::npos;
  size_t line_start = rest.find('\n');
  while (line_start != std::string_view::npos) {
    size_t next = rest.find('\n', line_start + 1);
    std::string_view line = rest.substr(
        line_start + 1, next == std::string_view::npos ? std::string_view::npos
                                                       : next - line_start - 1);
    if (Trim(line).empty()) {
      cut = line_start;
      break;
    }
    line_start = next;
  }
  std::string_view text = Trim(rest.substr(0, cut));
  if (text.empty()) return std::nullopt;
  return std::string(text);
}

std::string MakeCfId(const std::string& generator, const std::string& factual_id,
                     Field edited_field, const std::string& target_label) {
  return generator + "/" + factual_id + "/" + std::string(FieldName(edited_field)) + "/" +
         target_label;
}

CounterfactualRecord GenerateCf(ChatProvider& chat, const PromptTemplate& tmpl,
                                const Task& task, const DemoPair& demo,
                                const FactualInstance& query,
                                const std::string& target_label, Field edited_field,
                                const std::string& generator) {
  CounterfactualRecord r;
  r.cf_id = MakeCfId(generator, query.id, edited_field, target_label);
  r.factual_id = query.id;
  r.generator = generator;
  r.target_label = target_label;
  r.edited_field = edited_field;
  if (task.is_pair()) {
    r.counterpart = query.FieldText(edited_field == Field::kPremise ? Field::kHypothesis
                                                                     : Field::kPremise);
  }
  std::string prompt = BuildPrompt(tmpl, task, demo, query, target_label, edited_field);
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) prompt += "\n" + tmpl.repair_instruction + "\n";
    ChatOutcome outcome = chat.Complete(prompt);
    r.raw_response = outcome.ok() || outcome.status == ChatOutcome::Status::kRefusal
                         ? outcome.text
                         : outcome.error;
    if (outcome.status == ChatOutcome::Status::kTransportFailure) {
      r.parse_status = ParseStatus::kTransportFailure;
      return r;
    }
    if (outcome.status == ChatOutcome::Status::kRefusal) {
      r.parse_status = ParseStatus::kRefusal;
      return r;
    }
    if (auto text = ExtractCounterfactual(outcome.text, tmpl.markers.counterfactual)) {
      r.text = *text;
      r.parse_status = ParseStatus::kOk;
      return r;
    }
    r.parse_status = ParseStatus::kTemplateViolation;
  }
  return r;
}

double SuccessRate(const std::vector<CounterfactualRecord>& records) {
  if (records.empty()) throw InvalidArgument("success rate of an empty run");
  size_t ok = 0;
  for (const auto& r : records) ok += r.ok() ? 1 : 0;
  return *Percentage(ok, records.size());
}

double SuccessRate(const GenerationRun& run) { return SuccessRate(run.records); }

std::vector<GenerationRequest> PlanRequests(const Task& task, const DatasetSplit& split,
                                            const GenerationOptions& options) {
  CheckField(task, options.edited_field);
  if (options.target_override && !task.HasLabel(*options.target_override)) {
    throw InvalidArgument("target override \"" + *options.target_override +
                          "\" not in label set");
  }
  std::vector<GenerationRequest> out;
  for (const auto& inst : split.instances) {
    GenerationRequest req;
    req.factual = &inst;
    req.edited_field = options.edited_field;
    if (options.target_override) {
      if (*options.target_override == inst.label) continue;
      req.target_label = *options.target_override;
    } else {
      req.target_label = DefaultTargetLabel(task, inst.label);
    }
    out.push_back(std::move(req));
  }
  return out;
}

GenerationRun RunGeneration(const GenerationOptions& options, const Task& task,
                            const DatasetSplit& split, const EmbeddingIndex& index,
                            Embedder& embedder, ChatProvider& chat,
                            const PromptTemplate& tmpl,
                            const std::vector<CounterfactualRecord>& existing,
                            const std::function<void(const CounterfactualRecord&)>&
                                on_new_record) {
  GenerationRun run;
  run.run_id = options.run_id;
  run.generator = options.generator;
  run.dataset = options.dataset;
  run.edited_field = options.edited_field;
  run.seed = options.seed;

  std::unordered_map<std::string, const CounterfactualRecord*> done;
  for (const auto& r : existing) done[r.cf_id] = &r;

  auto requests = PlanRequests(task, split, options);
  run.records.resize(requests.size());
  std::vector<size_t> todo;
  for (size_t i = 0; i < requests.size(); ++i) {
    const auto& req = requests[i];
    auto it = done.find(MakeCfId(options.generator, req.factual->id, req.edited_field,
                                 req.target_label));
    if (it != done.end()) {
      run.records[i] = *it->second;
    } else {
      todo.push_back(i);
    }
  }
  const size_t batch = static_cast<size_t>(std::max(1, chat.config().parallelism));
  for (size_t start = 0; start < todo.size(); start += batch) {
    size_t end = std::min(todo.size(), start + batch);
    ParallelFor(end - start, chat.config().parallelism, [&](size_t k) {
      const auto& req = requests[todo[start + k]];
      DemoPair demo = NearestDemo(index, task, *req.factual, req.target_label,
                                  req.edited_field, embedder);
      run.records[todo[start + k]] =
          GenerateCf(chat, tmpl, task, demo, *req.factual, req.target_label,
                     req.edited_field, options.generator);
    });
    if (on_new_record) {
      for (size_t k = start; k < end; ++k) on_new_record(run.records[todo[k]]);
    }
  }
  return run;
}

}  // namespace cfx
