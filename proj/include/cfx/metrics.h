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

#ifndef CFX_METRICS_H_
#define CFX_METRICS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfx/corpus.h"
#include "cfx/providers.h"
#include "cfx/records.h"

namespace cfx {

// Whitespace segmentation of the trimmed source. |tokens| is the length used
// to normalise textual similarity.
struct TokenizedText {
  std::vector<std::string> tokens;
  std::string source;
};

TokenizedText Tokenize(std::string_view source);

// Token-level edit distance (unit-cost insert, delete, substitute).
size_t Levenshtein(std::span<const std::string> a, std::span<const std::string> b);
size_t Levenshtein(const TokenizedText& a, const TokenizedText& b);

enum class EditKind { kKeep, kSubstitute, kInsert, kDelete };

struct EditOp {
  EditKind kind;
  std::string from;  // empty for kInsert
  std::string to;  // empty for kDelete
};

// One minimal edit script turning `a` into `b`; its non-keep ops number
// exactly Levenshtein(a, b). Prefers substitutions over insert/delete pairs.
std::vector<EditOp> AlignTokens(std::span<const std::string> a,
                                std::span<const std::string> b);

struct TsPair {
  std::string factual;
  std::string counterfactual;
};

struct TsResult {
  std::optional<double> mean;  // absent when no pair was usable
  size_t n_used = 0;
  size_t n_empty_factual = 0;  // skipped: zero-token factual
};

// Mean over pairs of Levenshtein(x, x') / |x|.
TsResult TextualSimilarity(const std::vector<TsPair>& pairs);

// exp(-(1/n) * sum of logprobs). Throws InvalidArgument on n = 0.
double Perplexity(const TokenLogprobs& lp);
double Perplexity(std::span<const double> logprobs);

// 100 * matches / n, or absent for n = 0.
std::optional<double> Percentage(size_t matches, size_t n);

// Classifier input for a counterfactual: the text for SingleText, the full
// pair with the edited field substituted for PairText.
ClassifierInput CounterfactualInput(const Task& task, const FactualInstance& factual,
                                    const CounterfactualRecord& cf);

struct FlipOutcome {
  std::string cf_id;
  std::string predicted;
  bool flipped = false;
};

struct FlipRateResult {
  std::optional<double> rate;
  std::vector<FlipOutcome> outcomes;  // ok records only, in input order
};

// Percentage of ok counterfactuals whose predicted label equals the target
// (case-insensitive). A classifier protocol error is rethrown as
// ProtocolError naming the cf_id.
FlipRateResult FlipRate(const Task& task, const FactualLookup& factuals,
                        const std::vector<CounterfactualRecord>& cfs,
                        Classifier& classifier);

struct ExclusionCounts {
  size_t template_violation = 0;
  size_t refusal = 0;
  size_t transport_failure = 0;

  size_t total() const { return template_violation + refusal + transport_failure; }
};

ExclusionCounts CountExclusions(const std::vector<CounterfactualRecord>& records);

// Everything measured for one ok counterfactual. Stored by `eval` so reports
// can be rebuilt without contacting any provider.
struct CfMeasurement {
  std::string cf_id;
  std::string predicted_label;
  bool flipped = false;
  double perplexity = 0.0;
  // Levenshtein(x, x') / |x|; absent when the factual field has no tokens.
  std::optional<double> normalized_distance;
};

ojson ToJson(const CfMeasurement& m);
CfMeasurement MeasurementFromJson(const ojson& j, const std::string& where);

// Measures every ok record, issuing provider calls on up to
// max(classifier, scorer) parallelism threads. Output is in cf_id order.
std::vector<CfMeasurement> MeasureCounterfactuals(
    const Task& task, const FactualLookup& factuals,
    const std::vector<CounterfactualRecord>& records, Classifier& classifier,
    TokenScorer& scorer);

struct IntrinsicReport {
  std::string generator;
  std::string dataset;
  size_t n_ok = 0;
  std::optional<double> ppl;
  std::optional<double> ts;
  std::optional<double> fr;
  ExclusionCounts excluded;
  size_t n_ts_skipped = 0;
};

// Folds measurements in cf_id order. Every ok record must have a measurement.
IntrinsicReport AggregateIntrinsic(const std::string& generator,
                                   const std::string& dataset,
                                   const std::vector<CounterfactualRecord>& records,
                                   const std::vector<CfMeasurement>& measurements);

IntrinsicReport ComputeIntrinsicReport(const GenerationRun& run, const Task& task,
                                       const FactualLookup& factuals,
                                       Classifier& classifier, TokenScorer& scorer);

}  // namespace cfx

#endif  // CFX_METRICS_H_
