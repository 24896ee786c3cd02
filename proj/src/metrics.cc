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

#include "cfx/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cfx/error.h"
#include "cfx/parallel.h"
#include "cfx/text.h"

namespace cfx {

TokenizedText Tokenize(std::string_view source) {
  TokenizedText t;
  t.source = std::string(source);
  t.tokens = SplitWhitespace(Trim(source));
  return t;
}

size_t Levenshtein(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<size_t> prev(b.size() + 1);
  std::vector<size_t> cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), size_t{0});
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

size_t Levenshtein(const TokenizedText& a, const TokenizedText& b) {
  return Levenshtein(a.tokens, b.tokens);
}

std::vector<EditOp> AlignTokens(std::span<const std::string> a,
                                std::span<const std::string> b) {
  const size_t n = a.size();
  const size_t m = b.size();
  std::vector<size_t> dp((n + 1) * (m + 1));
  auto at = [&](size_t i, size_t j) -> size_t& { return dp[i * (m + 1) + j]; };
  for (size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      at(i, j) = std::min({at(i - 1, j) + 1, at(i, j - 1) + 1,
                           at(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  std::vector<EditOp> ops;
  size_t i = n;
  size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && a[i - 1] == b[j - 1] && at(i, j) == at(i - 1, j - 1)) {
      ops.push_back({EditKind::kKeep, a[i - 1], b[j - 1]});
      --i;
      --j;
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      ops.push_back({EditKind::kSubstitute, a[i - 1], b[j - 1]});
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ops.push_back({EditKind::kDelete, a[i - 1], ""});
      --i;
    } else {
      ops.push_back({EditKind::kInsert, "", b[j - 1]});
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

TsResult TextualSimilarity(const std::vector<TsPair>& pairs) {
  TsResult result;
  double sum = 0.0;
  for (const auto& p : pairs) {
    TokenizedText x = Tokenize(p.factual);
    if (x.tokens.empty()) {
      ++result.n_empty_factual;
      continue;
    }
    TokenizedText y = Tokenize(p.counterfactual);
    sum += static_cast<double>(Levenshtein(x, y)) / static_cast<double>(x.tokens.size());
    ++result.n_used;
  }
  if (result.n_used > 0) result.mean = sum / static_cast<double>(result.n_used);
  return result;
}

double Perplexity(std::span<const double> logprobs) {
  if (logprobs.empty()) throw InvalidArgument("perplexity of an empty token list");
  double sum = 0.0;
  for (double lp : logprobs) sum += lp;
  return std::exp(-sum / static_cast<double>(logprobs.size()));
}

double Perplexity(const TokenLogprobs& lp) {
  if (lp.tokens.size() != lp.logprobs.size()) {
    throw InvalidArgument("token/logprob length mismatch");
  }
  return Perplexity(std::span<const double>(lp.logprobs));
}

std::optional<double> Percentage(size_t matches, size_t n) {
  if (n == 0) return std::nullopt;
  return 100.0 * static_cast<double>(matches) / static_cast<double>(n);
}

ClassifierInput CounterfactualInput(const Task& task, const FactualInstance& factual,
                                    const CounterfactualRecord& cf) {
  ClassifierInput input;
  if (task.is_pair()) {
    std::tie(input.premise, input.hypothesis) = PairAfterEdit(factual, cf);
  } else {
    input.text = cf.text;
  }
  return input;
}

namespace {

std::vector<const CounterfactualRecord*> OkRecords(
    const std::vector<CounterfactualRecord>& records) {
  std::vector<const CounterfactualRecord*> ok;
  for (const auto& r : records) {
    if (r.ok()) ok.push_back(&r);
  }
  return ok;
}

const FactualInstance& RequireFactual(const FactualLookup& factuals,
                                      const CounterfactualRecord& cf) {
  const FactualInstance* f = factuals.Find(cf.factual_id);
  if (f == nullptr) {
    throw DataError("counterfactual " + cf.cf_id + " references unknown factual \"" +
                    cf.factual_id + "\"");
  }
  return *f;
}

ClassifierPrediction ClassifyOrThrow(Classifier& classifier, const Task& task,
                                     const FactualInstance& factual,
                                     const CounterfactualRecord& cf) {
  try {
    return classifier.Classify(CounterfactualInput(task, factual, cf));
  } catch (const ProtocolError& e) {
    throw ProtocolError("cf " + cf.cf_id + ": " + e.what());
  }
}

}  // namespace

FlipRateResult FlipRate(const Task& task, const FactualLookup& factuals,
                        const std::vector<CounterfactualRecord>& cfs,
                        Classifier& classifier) {
  auto ok = OkRecords(cfs);
  FlipRateResult result;
  result.outcomes.resize(ok.size());
  ParallelFor(ok.size(), classifier.config().parallelism, [&](size_t i) {
    const CounterfactualRecord& cf = *ok[i];
    ClassifierPrediction p =
        ClassifyOrThrow(classifier, task, RequireFactual(factuals, cf), cf);
    result.outcomes[i] = {cf.cf_id, p.label, CaseFold(p.label) == CaseFold(cf.target_label)};
  });
  size_t flipped = 0;
  for (const auto& o : result.outcomes) flipped += o.flipped ? 1 : 0;
  result.rate = Percentage(flipped, ok.size());
  return result;
}

ExclusionCounts CountExclusions(const std::vector<CounterfactualRecord>& records) {
  ExclusionCounts c;
  for (const auto& r : records) {
    switch (r.parse_status) {
      case ParseStatus::kTemplateViolation: ++c.template_violation; break;
      case ParseStatus::kRefusal: ++c.refusal; break;
      case ParseStatus::kTransportFailure: ++c.transport_failure; break;
      case ParseStatus::kOk: break;
    }
  }
  return c;
}

ojson ToJson(const CfMeasurement& m) {
  ojson out = ojson::object();
  out["cf_id"] = m.cf_id;
  out["predicted_label"] = m.predicted_label;
  out["flipped"] = m.flipped;
  out["perplexity"] = m.perplexity;
  if (m.normalized_distance) {
    out["normalized_distance"] = *m.normalized_distance;
  } else {
    out["normalized_distance"] = nullptr;
  }
  return out;
}

CfMeasurement MeasurementFromJson(const ojson& j, const std::string& where) {
  try {
    CfMeasurement m;
    m.cf_id = j.at("cf_id").get<std::string>();
    m.predicted_label = j.at("predicted_label").get<std::string>();
    m.flipped = j.at("flipped").get<bool>();
    m.perplexity = j.at("perplexity").get<double>();
    const auto& d = j.at("normalized_distance");
    if (!d.is_null()) m.normalized_distance = d.get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": malformed measurement: " + e.what());
  }
}

std::vector<CfMeasurement> MeasureCounterfactuals(
    const Task& task, const FactualLookup& factuals,
    const std::vector<CounterfactualRecord>& records, Classifier& classifier,
    TokenScorer& scorer) {
  auto ok = OkRecords(records);
  std::sort(ok.begin(), ok.end(), [](const auto* a, const auto* b) {
    return a->cf_id < b->cf_id;
  });
  std::vector<CfMeasurement> out(ok.size());
  int parallelism = std::max(classifier.config().parallelism, scorer.config().parallelism);
  ParallelFor(ok.size(), parallelism, [&](size_t i) {
    const CounterfactualRecord& cf = *ok[i];
    const FactualInstance& f = RequireFactual(factuals, cf);
    CfMeasurement m;
    m.cf_id = cf.cf_id;
    ClassifierPrediction p = ClassifyOrThrow(classifier, task, f, cf);
    m.predicted_label = p.label;
    m.flipped = CaseFold(p.label) == CaseFold(cf.target_label);
    m.perplexity = Perplexity(scorer.Score(cf.text));
    TokenizedText x = Tokenize(f.FieldText(cf.edited_field));
    if (!x.tokens.empty()) {
      m.normalized_distance = static_cast<double>(Levenshtein(x, Tokenize(cf.text))) /
                              static_cast<double>(x.tokens.size());
    }
    out[i] = std::move(m);
  });
  return out;
}

IntrinsicReport AggregateIntrinsic(const std::string& generator,
                                   const std::string& dataset,
                                   const std::vector<CounterfactualRecord>& records,
                                   const std::vector<CfMeasurement>& measurements) {
  std::map<std::string, const CfMeasurement*> by_id;
  for (const auto& m : measurements) by_id[m.cf_id] = &m;
  auto ok = OkRecords(records);
  std::sort(ok.begin(), ok.end(), [](const auto* a, const auto* b) {
    return a->cf_id < b->cf_id;
  });
  IntrinsicReport report;
  report.generator = generator;
  report.dataset = dataset;
  report.n_ok = ok.size();
  report.excluded = CountExclusions(records);
  double ppl_sum = 0.0;
  double ts_sum = 0.0;
  size_t ts_n = 0;
  size_t flipped = 0;
  for (const auto* r : ok) {
    auto it = by_id.find(r->cf_id);
    if (it == by_id.end()) {
      throw DataError("no measurement for ok counterfactual " + r->cf_id);
    }
    const CfMeasurement& m = *it->second;
    ppl_sum += m.perplexity;
    flipped += m.flipped ? 1 : 0;
    if (m.normalized_distance) {
      ts_sum += *m.normalized_distance;
      ++ts_n;
    } else {
      ++report.n_ts_skipped;
    }
  }
  if (!ok.empty()) report.ppl = ppl_sum / static_cast<double>(ok.size());
  if (ts_n > 0) report.ts = ts_sum / static_cast<double>(ts_n);
  report.fr = Percentage(flipped, ok.size());
  return report;
}

IntrinsicReport ComputeIntrinsicReport(const GenerationRun& run, const Task& task,
                                       const FactualLookup& factuals,
                                       Classifier& classifier, TokenScorer& scorer) {
  size_t n_ok = 0;
  for (const auto& r : run.records) n_ok += r.ok() ? 1 : 0;
  if (n_ok == 0) {
    throw InvalidArgument("run " + run.run_id + " has no ok counterfactuals");
  }
  auto measurements = MeasureCounterfactuals(task, factuals, run.records, classifier, scorer);
  return AggregateIntrinsic(run.generator, run.dataset, run.records, measurements);
}

}  // namespace cfx
