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

#include "cfx/judge.h"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>
#include <unordered_map>

#include "cfx/config.h"
#include "cfx/error.h"
#include "cfx/genpipe.h"
#include "cfx/metrics.h"
#include "cfx/parallel.h"
#include "cfx/text.h"

namespace cfx {

namespace {

constexpr std::array<Aspect, 3> kAllAspects = {Aspect::kFL, Aspect::kUA, Aspect::kRS};

}  // namespace

std::string_view AspectName(Aspect aspect) {
  switch (aspect) {
    case Aspect::kFL:
      return "FL";
    case Aspect::kUA:
      return "UA";
    case Aspect::kRS:
      return "RS";
  }
  return "?";
}

std::optional<Aspect> ParseAspect(std::string_view name) {
  std::string n = CaseFold(Trim(name));
  for (Aspect a : kAllAspects) {
    if (n == CaseFold(AspectName(a))) return a;
  }
  return std::nullopt;
}

std::vector<Aspect> ParseAspects(std::string_view list) {
  std::vector<Aspect> out;
  for (const auto& part : Split(list, ',')) {
    auto a = ParseAspect(part);
    if (!a) throw InvalidArgument("unknown aspect \"" + part + "\" (expected FL, UA, RS)");
    if (std::find(out.begin(), out.end(), *a) != out.end()) {
      throw InvalidArgument("aspect " + std::string(AspectName(*a)) + " listed twice");
    }
    out.push_back(*a);
  }
  if (out.empty()) throw InvalidArgument("no aspects requested");
  return out;
}

std::string_view JudgeModeName(JudgeMode mode) {
  switch (mode) {
    case JudgeMode::kHonest:
      return "honest";
    case JudgeMode::kCorrupted:
      return "corrupted";
    case JudgeMode::kClassify:
      return "classify";
  }
  return "?";
}

std::optional<JudgeMode> ParseJudgeMode(std::string_view name) {
  for (JudgeMode m : {JudgeMode::kHonest, JudgeMode::kCorrupted, JudgeMode::kClassify}) {
    if (name == JudgeModeName(m)) return m;
  }
  return std::nullopt;
}

std::optional<int> JudgeScore::Get(Aspect aspect) const {
  switch (aspect) {
    case Aspect::kFL:
      return fl;
    case Aspect::kUA:
      return ua;
    case Aspect::kRS:
      return rs;
  }
  return std::nullopt;
}

void JudgeScore::Set(Aspect aspect, int value) {
  switch (aspect) {
    case Aspect::kFL:
      fl = value;
      break;
    case Aspect::kUA:
      ua = value;
      break;
    case Aspect::kRS:
      rs = value;
      break;
  }
}

std::string_view JudgeStatusName(JudgeStatus status) {
  switch (status) {
    case JudgeStatus::kOk:
      return "ok";
    case JudgeStatus::kParseFailure:
      return "parse_failure";
    case JudgeStatus::kRefusal:
      return "refusal";
    case JudgeStatus::kTransportFailure:
      return "transport_failure";
  }
  return "?";
}

std::optional<JudgeStatus> ParseJudgeStatus(std::string_view name) {
  for (JudgeStatus s : {JudgeStatus::kOk, JudgeStatus::kParseFailure,
                        JudgeStatus::kRefusal, JudgeStatus::kTransportFailure}) {
    if (name == JudgeStatusName(s)) return s;
  }
  return std::nullopt;
}

ojson ToJson(const JudgeRecord& r) {
  ojson j;
  j["cf_id"] = r.cf_id;
  j["judge_model"] = r.judge_model;
  j["mode"] = std::string(JudgeModeName(r.mode));
  j["shown_label"] = r.shown_label;
  j["target_label"] = r.target_label;
  ojson aspects = ojson::array();
  for (Aspect a : r.aspects) aspects.push_back(std::string(AspectName(a)));
  j["aspects"] = aspects;
  ojson scores = ojson::object();
  for (Aspect a : kAllAspects) {
    if (auto v = r.scores.Get(a)) scores[std::string(AspectName(a))] = *v;
  }
  j["scores"] = scores;
  j["predicted_label"] = r.predicted_label;
  j["parse_status"] = std::string(JudgeStatusName(r.parse_status));
  j["raw_response"] = r.raw_response;
  return j;
}

namespace {

std::string Str(const ojson& j, const char* key, const std::string& where,
                bool required) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw DataError(where + ": missing field \"" + key + "\"");
    return "";
  }
  if (!it->is_string()) throw DataError(where + ": field \"" + key + "\" is not a string");
  return it->get<std::string>();
}

}  // namespace

JudgeRecord JudgeRecordFromJson(const ojson& j, const std::string& where) {
  JudgeRecord r;
  r.cf_id = Str(j, "cf_id", where, true);
  r.judge_model = Str(j, "judge_model", where, false);
  auto mode = ParseJudgeMode(Str(j, "mode", where, true));
  if (!mode) throw DataError(where + ": unknown judge mode");
  r.mode = *mode;
  r.shown_label = Str(j, "shown_label", where, false);
  r.target_label = Str(j, "target_label", where, true);
  if (auto it = j.find("aspects"); it != j.end()) {
    if (!it->is_array()) throw DataError(where + ": aspects must be an array");
    for (const auto& a : *it) {
      auto parsed = a.is_string() ? ParseAspect(a.get<std::string>()) : std::nullopt;
      if (!parsed) throw DataError(where + ": bad aspect " + a.dump());
      r.aspects.push_back(*parsed);
    }
  }
  if (auto it = j.find("scores"); it != j.end()) {
    if (!it->is_object()) throw DataError(where + ": scores must be an object");
    for (const auto& [key, value] : it->items()) {
      auto a = ParseAspect(key);
      if (!a || !value.is_number_integer()) {
        throw DataError(where + ": bad score entry \"" + key + "\"");
      }
      int v = value.get<int>();
      if (v < 1 || v > 4) throw DataError(where + ": score out of range 1..4");
      r.scores.Set(*a, v);
    }
  }
  r.predicted_label = Str(j, "predicted_label", where, false);
  auto status = ParseJudgeStatus(Str(j, "parse_status", where, true));
  if (!status) throw DataError(where + ": unknown parse_status");
  r.parse_status = *status;
  r.raw_response = Str(j, "raw_response", where, false);
  return r;
}

std::vector<JudgeRecord> LoadJudgeRecords(const std::filesystem::path& path) {
  std::vector<JudgeRecord> out;
  ForEachJsonLine(path, [&](size_t line, const ojson& j) {
    out.push_back(JudgeRecordFromJson(j, path.string() + ":" + std::to_string(line)));
  });
  return out;
}

void WriteJudgeRecords(const std::filesystem::path& path,
                       const std::vector<JudgeRecord>& records) {
  std::vector<ojson> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(ToJson(r));
  WriteJsonl(path, rows);
}

std::string CorruptLabel(const Task& task, const std::string& factual_label,
                         const std::string& target_label, uint64_t seed) {
  if (!task.HasLabel(factual_label) || !task.HasLabel(target_label)) {
    throw InvalidArgument("corrupt_label: label outside the task label set");
  }
  if (factual_label == target_label) {
    throw InvalidArgument("corrupt_label: factual and target label are both \"" +
                          target_label + "\"");
  }
  const auto& labels = task.labels();
  if (labels.size() == 2) {
    return labels[0] == target_label ? labels[1] : labels[0];
  }
  std::vector<std::string> pool;
  for (const auto& l : labels) {
    if (l != factual_label && l != target_label) pool.push_back(l);
  }
  if (pool.size() == 1) return pool.front();
  std::mt19937_64 rng(seed);
  return pool[rng() % pool.size()];
}

JudgeTemplate JudgeTemplate::Default() {
  JudgeTemplate t;
  t.version = "judge-v1";
  t.score_instruction =
      "You will see an original text and an edited version of it, together with "
      "a label. Rate the edited version on each criterion below with an integer "
      "from 1 (strongly disagree) to 4 (strongly agree).";
  t.aspect_descriptions = {
      {Aspect::kFL, "The edited text belongs to the given label."},
      {Aspect::kUA, "The edited text makes no unnecessary alterations to the original."},
      {Aspect::kRS, "The edited text is realistic and could occur naturally."},
  };
  t.answer_instruction =
      "Reply with one line per criterion of the form <criterion>: <score> and "
      "nothing else.";
  t.original_line = "Original: {original}";
  t.counterfactual_line = "Counterfactual: {counterfactual}";
  t.label_line = "Label: {label}";
  t.pair_rendering = "Premise: {premise} Hypothesis: {hypothesis}";
  t.classify_instruction =
      "Read the premise and hypothesis below and decide how they relate. Reply "
      "with exactly one word from this list: {labels}.";
  t.score_markers = {{Aspect::kFL, "FL:"}, {Aspect::kUA, "UA:"}, {Aspect::kRS, "RS:"}};
  return t;
}

JudgeTemplate JudgeTemplate::FromConfig(const nlohmann::json& cfg) {
  JudgeTemplate t = Default();
  t.version = GetString(cfg, "version", t.version);
  t.score_instruction = GetString(cfg, "score_instruction", t.score_instruction);
  t.answer_instruction = GetString(cfg, "answer_instruction", t.answer_instruction);
  t.classify_instruction = GetString(cfg, "classify_instruction", t.classify_instruction);
  for (Aspect a : kAllAspects) {
    std::string name(AspectName(a));
    t.aspect_descriptions[a] =
        GetString(cfg, "aspects." + name, t.aspect_descriptions[a]);
    t.score_markers[a] = GetString(cfg, "markers." + name, t.score_markers[a]);
    if (Trim(t.score_markers[a]).empty()) {
      throw ConfigError("judge template marker for " + name + " is empty");
    }
  }
  t.original_line = GetString(cfg, "render.original", t.original_line);
  t.counterfactual_line = GetString(cfg, "render.counterfactual", t.counterfactual_line);
  t.label_line = GetString(cfg, "render.label", t.label_line);
  t.pair_rendering = GetString(cfg, "render.pair", t.pair_rendering);
  return t;
}

JudgeTemplate JudgeTemplate::Load(const std::filesystem::path& path) {
  return FromConfig(LoadConfigFile(path));
}

namespace {

std::string RenderInstance(const JudgeTemplate& t, const Task& task,
                           const std::string& text, const std::string& premise,
                           const std::string& hypothesis) {
  if (!task.is_pair()) return text;
  return RenderFormat(t.pair_rendering, {{"premise", premise}, {"hypothesis", hypothesis}});
}

std::string RenderFactual(const JudgeTemplate& t, const Task& task,
                          const FactualInstance& f) {
  return RenderInstance(t, task, f.text, f.premise, f.hypothesis);
}

std::string RenderCf(const JudgeTemplate& t, const Task& task, const FactualInstance& f,
                     const CounterfactualRecord& cf) {
  if (!task.is_pair()) return cf.text;
  auto [premise, hypothesis] = PairAfterEdit(f, cf);
  return RenderInstance(t, task, "", premise, hypothesis);
}

void RequireOk(const CounterfactualRecord& cf) {
  if (!cf.ok()) throw InvalidArgument("counterfactual " + cf.cf_id + " is not ok");
}

}  // namespace

std::string BuildJudgePrompt(const JudgeTemplate& tmpl, const Task& task,
                             const FactualInstance& factual,
                             const CounterfactualRecord& cf,
                             const std::string& shown_label,
                             const std::vector<Aspect>& aspects) {
  RequireOk(cf);
  if (aspects.empty()) throw InvalidArgument("no aspects requested");
  std::string out = tmpl.score_instruction + "\n";
  for (Aspect a : aspects) {
    out += "- " + std::string(AspectName(a)) + ": " + tmpl.aspect_descriptions.at(a) + "\n";
  }
  out += tmpl.answer_instruction + "\n\n";
  out += RenderFormat(tmpl.original_line, {{"original", RenderFactual(tmpl, task, factual)}});
  out += "\n";
  out += RenderFormat(tmpl.counterfactual_line,
                      {{"counterfactual", RenderCf(tmpl, task, factual, cf)}});
  out += "\n";
  out += RenderFormat(tmpl.label_line, {{"label", shown_label}});
  out += "\n";
  return out;
}

std::string BuildClassifyPrompt(const JudgeTemplate& tmpl, const Task& task,
                                const FactualInstance& factual,
                                const CounterfactualRecord& cf) {
  RequireOk(cf);
  if (!task.is_pair()) throw InvalidArgument("classify mode needs a pair task");
  std::string out =
      RenderFormat(tmpl.classify_instruction, {{"labels", Join(task.labels(), ", ")}});
  out += "\n\n";
  out += RenderFormat(tmpl.counterfactual_line,
                      {{"counterfactual", RenderCf(tmpl, task, factual, cf)}});
  out += "\n";
  return out;
}

std::optional<JudgeScore> ParseScores(const JudgeTemplate& tmpl,
                                      const std::string& response,
                                      const std::vector<Aspect>& aspects) {
  JudgeScore score;
  for (Aspect a : aspects) {
    const std::string& marker = tmpl.score_markers.at(a);
    std::optional<long> found;
    for (size_t pos = response.find(marker); pos != std::string::npos;
         pos = response.find(marker, pos + 1)) {
      // Reject matches inside a longer word, e.g. "XFL:".
      if (pos > 0 && std::isalnum(static_cast<unsigned char>(response[pos - 1]))) continue;
      size_t i = pos + marker.size();
      while (i < response.size() && (response[i] == ' ' || response[i] == '\t')) ++i;
      size_t start = i;
      if (i < response.size() && (response[i] == '-' || response[i] == '+')) ++i;
      size_t digits = i;
      while (i < response.size() && std::isdigit(static_cast<unsigned char>(response[i]))) ++i;
      if (i == digits || i - digits > 6) continue;
      found = std::stol(response.substr(start, i - start));
    }
    if (!found || *found < 1 || *found > 4) return std::nullopt;
    score.Set(a, static_cast<int>(*found));
  }
  return score;
}

std::optional<std::string> ParseClassifiedLabel(const Task& task,
                                                const std::string& response) {
  std::string whole = CaseFold(StripPunctuation(Trim(response)));
  if (auto m = task.MatchLabel(Trim(whole))) return m;
  std::set<std::string> seen;
  for (const auto& tok : SplitWhitespace(response)) {
    if (auto m = task.MatchLabel(StripPunctuation(tok))) seen.insert(*m);
  }
  if (seen.size() == 1) return *seen.begin();
  return std::nullopt;
}

namespace {

JudgeRecord BaseRecord(ChatProvider& chat, const CounterfactualRecord& cf, JudgeMode mode) {
  JudgeRecord r;
  r.cf_id = cf.cf_id;
  r.judge_model = chat.config().model_name.empty() ? chat.config().name
                                                   : chat.config().model_name;
  r.mode = mode;
  r.target_label = cf.target_label;
  return r;
}

// Maps a non-ok chat outcome onto the record; returns false in that case.
bool Settle(const ChatOutcome& outcome, JudgeRecord& r) {
  if (outcome.status == ChatOutcome::Status::kTransportFailure) {
    r.parse_status = JudgeStatus::kTransportFailure;
    r.raw_response = outcome.error;
    return false;
  }
  r.raw_response = outcome.text;
  if (outcome.status == ChatOutcome::Status::kRefusal) {
    r.parse_status = JudgeStatus::kRefusal;
    return false;
  }
  return true;
}

}  // namespace

JudgeRecord JudgeCf(ChatProvider& chat, const JudgeTemplate& tmpl, const Task& task,
                    const FactualInstance& factual, const CounterfactualRecord& cf,
                    const std::string& shown_label, JudgeMode mode,
                    const std::vector<Aspect>& aspects) {
  if (mode == JudgeMode::kClassify) return ClassifyCf(chat, tmpl, task, factual, cf);
  JudgeRecord r = BaseRecord(chat, cf, mode);
  r.shown_label = shown_label;
  r.aspects = aspects;
  ChatOutcome outcome =
      chat.Complete(BuildJudgePrompt(tmpl, task, factual, cf, shown_label, aspects));
  if (!Settle(outcome, r)) return r;
  if (auto s = ParseScores(tmpl, outcome.text, aspects)) {
    r.scores = *s;
    r.parse_status = JudgeStatus::kOk;
  } else {
    r.parse_status = JudgeStatus::kParseFailure;
  }
  return r;
}

JudgeRecord ClassifyCf(ChatProvider& chat, const JudgeTemplate& tmpl, const Task& task,
                       const FactualInstance& factual, const CounterfactualRecord& cf) {
  JudgeRecord r = BaseRecord(chat, cf, JudgeMode::kClassify);
  ChatOutcome outcome = chat.Complete(BuildClassifyPrompt(tmpl, task, factual, cf));
  if (!Settle(outcome, r)) return r;
  if (auto label = ParseClassifiedLabel(task, outcome.text)) {
    r.predicted_label = *label;
    r.parse_status = JudgeStatus::kOk;
  } else {
    r.parse_status = JudgeStatus::kParseFailure;
  }
  return r;
}

std::string ShownLabel(const JudgeOptions& options, const Task& task,
                       const FactualInstance& factual, const CounterfactualRecord& cf) {
  switch (options.mode) {
    case JudgeMode::kHonest:
      return cf.target_label;
    case JudgeMode::kCorrupted:
      return CorruptLabel(task, factual.label, cf.target_label,
                          options.seed ^ Fnv1a64(cf.cf_id));
    case JudgeMode::kClassify:
      return "";
  }
  return "";
}

std::vector<JudgeRecord> RunJudge(
    const JudgeOptions& options, const Task& task, const FactualLookup& factuals,
    const std::vector<CounterfactualRecord>& cfs, ChatProvider& chat,
    const JudgeTemplate& tmpl, const std::vector<JudgeRecord>& existing,
    const std::function<void(const JudgeRecord&)>& on_new_record) {
  if (options.mode == JudgeMode::kClassify && !task.is_pair()) {
    throw InvalidArgument("classify mode needs a pair task");
  }
  std::vector<const CounterfactualRecord*> todo_cfs;
  for (const auto& cf : cfs) {
    if (cf.ok()) todo_cfs.push_back(&cf);
  }
  std::sort(todo_cfs.begin(), todo_cfs.end(),
            [](const auto* a, const auto* b) { return a->cf_id < b->cf_id; });
  std::vector<const FactualInstance*> facts;
  for (const auto* cf : todo_cfs) {
    const auto* f = factuals.Find(cf->factual_id);
    if (!f) {
      throw DataError("counterfactual " + cf->cf_id + " references unknown factual \"" +
                      cf->factual_id + "\"");
    }
    facts.push_back(f);
  }
  std::unordered_map<std::string, const JudgeRecord*> done;
  for (const auto& r : existing) {
    if (r.mode == options.mode) done[r.cf_id] = &r;
  }
  std::vector<JudgeRecord> out(todo_cfs.size());
  std::vector<size_t> pending;
  for (size_t i = 0; i < todo_cfs.size(); ++i) {
    auto it = done.find(todo_cfs[i]->cf_id);
    if (it != done.end()) {
      out[i] = *it->second;
    } else {
      pending.push_back(i);
    }
  }
  const size_t batch = static_cast<size_t>(std::max(1, chat.config().parallelism));
  for (size_t start = 0; start < pending.size(); start += batch) {
    size_t end = std::min(pending.size(), start + batch);
    ParallelFor(end - start, chat.config().parallelism, [&](size_t k) {
      size_t i = pending[start + k];
      const auto& cf = *todo_cfs[i];
      out[i] = JudgeCf(chat, tmpl, task, *facts[i], cf,
                       ShownLabel(options, task, *facts[i], cf), options.mode,
                       options.aspects);
    });
    if (on_new_record) {
      for (size_t k = start; k < end; ++k) on_new_record(out[pending[k]]);
    }
  }
  return out;
}

ScoreDistribution ComputeScoreDistribution(const std::vector<JudgeRecord>& records,
                                           Aspect aspect) {
  ScoreDistribution d;
  std::array<size_t, 4> counts = {0, 0, 0, 0};
  size_t sum = 0;
  for (const auto& r : records) {
    if (r.mode == JudgeMode::kClassify) continue;
    std::optional<int> v = r.ok() ? r.scores.Get(aspect) : std::nullopt;
    if (!v) {
      if (std::find(r.aspects.begin(), r.aspects.end(), aspect) != r.aspects.end()) {
        ++d.n_failed;
      }
      continue;
    }
    ++counts[static_cast<size_t>(*v - 1)];
    sum += static_cast<size_t>(*v);
    ++d.n_parsed;
  }
  if (d.n_parsed == 0) {
    throw InvalidArgument("no parsed " + std::string(AspectName(aspect)) + " scores");
  }
  for (size_t i = 0; i < 4; ++i) d.pct[i] = *Percentage(counts[i], d.n_parsed);
  d.pct_12 = *Percentage(counts[0] + counts[1], d.n_parsed);
  d.pct_34 = *Percentage(counts[2] + counts[3], d.n_parsed);
  d.avg = static_cast<double>(sum) / static_cast<double>(d.n_parsed);
  return d;
}

ScoreDistribution AverageDistributions(const ScoreDistribution& a,
                                       const ScoreDistribution& b) {
  ScoreDistribution d;
  for (size_t i = 0; i < 4; ++i) d.pct[i] = (a.pct[i] + b.pct[i]) / 2.0;
  d.pct_12 = (a.pct_12 + b.pct_12) / 2.0;
  d.pct_34 = (a.pct_34 + b.pct_34) / 2.0;
  d.avg = (a.avg + b.avg) / 2.0;
  d.n_parsed = a.n_parsed + b.n_parsed;
  d.n_failed = a.n_failed + b.n_failed;
  return d;
}

ClassifyAccuracy ComputeClassifyAccuracy(const std::vector<JudgeRecord>& records) {
  ClassifyAccuracy acc;
  for (const auto& r : records) {
    if (r.mode != JudgeMode::kClassify) continue;
    if (!r.ok()) {
      ++acc.n_failed;
      continue;
    }
    ++acc.n_parsed;
    if (CaseFold(r.predicted_label) == CaseFold(r.target_label)) ++acc.n_correct;
  }
  acc.accuracy = Percentage(acc.n_correct, acc.n_parsed);
  return acc;
}

bool DetectCopyPaste(const FactualInstance& factual, const CounterfactualRecord& cf) {
  if (!cf.ok() || cf.edited_field == Field::kText) return false;
  Field untouched =
      cf.edited_field == Field::kPremise ? Field::kHypothesis : Field::kPremise;
  return NormalizeForComparison(cf.text) ==
         NormalizeForComparison(factual.FieldText(untouched));
}

CopyPasteSummary CopyPasteRate(const FactualLookup& factuals,
                               const std::vector<CounterfactualRecord>& cfs) {
  CopyPasteSummary s;
  for (const auto& cf : cfs) {
    if (!cf.ok() || cf.edited_field == Field::kText) continue;
    const auto* f = factuals.Find(cf.factual_id);
    if (!f) {
      throw DataError("counterfactual " + cf.cf_id + " references unknown factual \"" +
                      cf.factual_id + "\"");
    }
    ++s.n_checked;
    if (DetectCopyPaste(*f, cf)) {
      ++s.n_copy;
      s.copy_ids.push_back(cf.cf_id);
    }
  }
  s.pct = Percentage(s.n_copy, s.n_checked);
  return s;
}

bool IsSelfJudging(std::string_view judge_model, std::string_view generator_model) {
  return !judge_model.empty() && CaseFold(Trim(judge_model)) == CaseFold(Trim(generator_model));
}

}  // namespace cfx
