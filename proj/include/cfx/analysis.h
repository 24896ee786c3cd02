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

// Augmentation export, accuracy-table ingestion, Spearman correlations and
// report tables.

#ifndef CFX_ANALYSIS_H_
#define CFX_ANALYSIS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cfx/corpus.h"
#include "cfx/judge.h"
#include "cfx/metrics.h"
#include "cfx/records.h"

namespace cfx {

struct AugmentResult {
  DatasetSplit dataset;
  size_t n_original = 0;
  size_t n_cf = 0;
  size_t n_excluded = 0;  // non-ok counterfactual records
};

// Originals unchanged plus one instance per ok counterfactual (id = cf_id,
// label = target), shuffled with a seeded Fisher-Yates pass.
AugmentResult AugmentExport(const Task& task, const DatasetSplit& original_train,
                            const std::vector<CounterfactualRecord>& cfs,
                            uint64_t seed);

// Average (fractional) ranks, 1-based.
std::vector<double> AverageRanks(const std::vector<double>& values);

// Pearson correlation of average ranks. Absent when either side is constant.
// Throws InvalidArgument on a length mismatch or fewer than 2 points.
std::optional<double> Spearman(const std::vector<double>& xs,
                               const std::vector<double>& ys);

struct AccuracyRow {
  std::string generator;
  std::string test_set;
  double accuracy = 0;
};

struct AccuracyTable {
  std::vector<AccuracyRow> rows;

  std::optional<double> Find(const std::string& generator,
                             const std::string& test_set) const;
  std::vector<std::string> TestSets() const;  // first-seen order
};

// CSV with header generator,test_set,accuracy.
AccuracyTable ParseAccuracyTable(const std::string& csv, const std::string& origin);
AccuracyTable LoadAccuracyTable(const std::filesystem::path& path);

// Mean judge scores for one generator.
struct JudgeSummary {
  std::string generator;
  std::string set;
  std::optional<double> fl;
  std::optional<double> ua;
  std::optional<double> rs;
};

double AverageScores(double fl, double ua, double rs);

struct CorrelationRow {
  std::string label;  // e.g. "Accuracy & -PPL"
  std::string scope;  // test set name, or "all"
  std::optional<double> rho;
  size_t n = 0;
};

// Spearman(accuracy, -PPL) and Spearman(accuracy, -TS) for every test set,
// over generators present in both inputs (and in `include` when non-empty).
std::vector<CorrelationRow> CorrelateAccuracy(const std::vector<IntrinsicReport>& intrinsic,
                                              const AccuracyTable& accuracies,
                                              const std::vector<std::string>& include);

// "FL & FR", "UA & -TS", "RS & -PPL" across generators.
std::vector<CorrelationRow> CorrelateJudge(const std::vector<IntrinsicReport>& intrinsic,
                                           const std::vector<JudgeSummary>& judge,
                                           const std::vector<std::string>& include);

using Cell = std::variant<std::monostate, std::string, int64_t, double>;

struct ReportTable {
  std::string schema;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

inline Cell OptionalCell(const std::optional<double>& v) {
  return v ? Cell(*v) : Cell(std::monostate{});
}

// Reals with 2 decimals, integers as is, absent values as a dash.
std::string RenderCell(const Cell& cell);
std::string RenderCsv(const ReportTable& table);
std::string RenderMarkdown(const ReportTable& table);

ReportTable IntrinsicTable(const std::vector<IntrinsicReport>& reports);
ReportTable SuccessTable(const std::vector<IntrinsicReport>& reports);

struct JudgeTableRow {
  std::string generator;
  std::string dataset;
  std::string field;  // edited field, or "avg" for the premise/hypothesis mean
  std::string set;  // "honest" or "corrupted"
  std::string aspect;
  std::optional<ScoreDistribution> dist;  // absent when nothing parsed
  size_t n_failed = 0;
};

struct ClassifyTableRow {
  std::string generator;
  std::string dataset;
  std::string field;
  ClassifyAccuracy acc;
};

ReportTable DistributionTable(const std::vector<JudgeTableRow>& rows);
ReportTable ClassifyTable(const std::vector<ClassifyTableRow>& rows);
ReportTable JudgeAverageTable(const std::vector<JudgeSummary>& rows);
ReportTable CorrelationTable(const std::vector<CorrelationRow>& rows);

}  // namespace cfx

#endif  // CFX_ANALYSIS_H_
