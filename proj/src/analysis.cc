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

#include "cfx/analysis.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include "cfx/error.h"
#include "cfx/jsonl.h"
#include "cfx/text.h"

namespace cfx {

AugmentResult AugmentExport(const Task& task, const DatasetSplit& original_train,
                            const std::vector<CounterfactualRecord>& cfs,
                            uint64_t seed) {
  AugmentResult out;
  out.dataset.name = original_train.name;
  out.dataset.instances = original_train.instances;
  out.n_original = original_train.instances.size();
  FactualLookup lookup(original_train);
  std::unordered_set<std::string> ids;
  for (const auto& inst : original_train.instances) ids.insert(inst.id);
  for (const auto& cf : cfs) {
    if (!cf.ok()) {
      ++out.n_excluded;
      continue;
    }
    if (!task.HasLabel(cf.target_label)) {
      throw DataError("counterfactual " + cf.cf_id + ": target label \"" +
                      cf.target_label + "\" is not in the task label set");
    }
    const auto* f = lookup.Find(cf.factual_id);
    if (!f) {
      throw DataError("counterfactual " + cf.cf_id + " references factual \"" +
                      cf.factual_id + "\" which is not in the training split");
    }
    if (!ids.insert(cf.cf_id).second) {
      throw DataError("duplicate id \"" + cf.cf_id + "\" in augmented dataset");
    }
    FactualInstance inst;
    inst.id = cf.cf_id;
    inst.label = cf.target_label;
    if (task.is_pair()) {
      auto [premise, hypothesis] = PairAfterEdit(*f, cf);
      inst.premise = premise;
      inst.hypothesis = hypothesis;
    } else {
      inst.text = cf.text;
    }
    out.dataset.instances.push_back(std::move(inst));
    ++out.n_cf;
  }
  std::mt19937_64 rng(seed);
  auto& v = out.dataset.instances;
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
  return out;
}

std::vector<double> AverageRanks(const std::vector<double>& values) {
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> Spearman(const std::vector<double>& xs,
                               const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw InvalidArgument("spearman: length mismatch (" + std::to_string(xs.size()) +
                          " vs " + std::to_string(ys.size()) + ")");
  }
  if (xs.size() < 2) throw InvalidArgument("spearman: need at least 2 points");
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      throw InvalidArgument("spearman: non-finite input");
    }
  }
  auto rx = AverageRanks(xs);
  auto ry = AverageRanks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    double dx = rx[i] - mx;
    double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  double rho = sxy / std::sqrt(sxx * syy);
  return std::clamp(rho, -1.0, 1.0);
}

std::optional<double> AccuracyTable::Find(const std::string& generator,
                                          const std::string& test_set) const {
  for (const auto& r : rows) {
    if (r.generator == generator && r.test_set == test_set) return r.accuracy;
  }
  return std::nullopt;
}

std::vector<std::string> AccuracyTable::TestSets() const {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (std::find(out.begin(), out.end(), r.test_set) == out.end()) {
      out.push_back(r.test_set);
    }
  }
  return out;
}

AccuracyTable ParseAccuracyTable(const std::string& csv, const std::string& origin) {
  AccuracyTable table;
  std::set<std::pair<std::string, std::string>> seen;
  auto lines = Split(csv, '\n');
  bool header = true;
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string line(Trim(lines[i]));
    if (line.empty()) continue;
    std::string where = origin + ":" + std::to_string(i + 1);
    auto cells = Split(line, ',');
    for (auto& c : cells) c = std::string(Trim(c));
    if (header) {
      if (cells != std::vector<std::string>{"generator", "test_set", "accuracy"}) {
        throw DataError(where + ": expected header generator,test_set,accuracy");
      }
      header = false;
      continue;
    }
    if (cells.size() != 3) throw DataError(where + ": expected 3 columns");
    AccuracyRow row{cells[0], cells[1], 0};
    if (row.generator.empty() || row.test_set.empty()) {
      throw DataError(where + ": empty generator or test_set");
    }
    try {
      size_t used = 0;
      row.accuracy = std::stod(cells[2], &used);
      if (used != cells[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(where + ": accuracy \"" + cells[2] + "\" is not a number");
    }
    if (!(row.accuracy >= 0 && row.accuracy <= 100)) {
      throw DataError(where + ": accuracy outside [0, 100]");
    }
    if (!seen.emplace(row.generator, row.test_set).second) {
      throw DataError(where + ": duplicate row for " + row.generator + "/" + row.test_set);
    }
    table.rows.push_back(std::move(row));
  }
  if (header) throw DataError(origin + ": missing header");
  return table;
}

AccuracyTable LoadAccuracyTable(const std::filesystem::path& path) {
  return ParseAccuracyTable(ReadTextFile(path), path.string());
}

double AverageScores(double fl, double ua, double rs) { return (fl + ua + rs) / 3.0; }

namespace {

std::map<std::string, const IntrinsicReport*> ByGenerator(
    const std::vector<IntrinsicReport>& intrinsic, const std::vector<std::string>& include) {
  std::map<std::string, const IntrinsicReport*> out;
  for (const auto& r : intrinsic) {
    if (!include.empty() &&
        std::find(include.begin(), include.end(), r.generator) == include.end()) {
      continue;
    }
    if (!out.emplace(r.generator, &r).second) {
      throw InvalidArgument("generator " + r.generator +
                            " has more than one intrinsic report; select one dataset");
    }
  }
  return out;
}

CorrelationRow Correlate(std::string label, std::string scope,
                         const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) {
    throw DataError("insufficient overlap for \"" + label + "\" (" + scope + "): " +
                    std::to_string(points.size()) + " shared generator(s), need 2");
  }
  std::vector<double> xs, ys;
  for (const auto& [x, y] : points) {
    xs.push_back(x);
    ys.push_back(y);
  }
  return {std::move(label), std::move(scope), Spearman(xs, ys), points.size()};
}

}  // namespace

std::vector<CorrelationRow> CorrelateAccuracy(const std::vector<IntrinsicReport>& intrinsic,
                                              const AccuracyTable& accuracies,
                                              const std::vector<std::string>& include) {
  auto gens = ByGenerator(intrinsic, include);
  std::vector<CorrelationRow> out;
  for (const auto& test_set : accuracies.TestSets()) {
    std::vector<std::pair<double, double>> ppl, ts;
    for (const auto& [gen, report] : gens) {
      auto acc = accuracies.Find(gen, test_set);
      if (!acc) continue;
      if (report->ppl) ppl.emplace_back(*acc, -*report->ppl);
      if (report->ts) ts.emplace_back(*acc, -*report->ts);
    }
    out.push_back(Correlate("Accuracy & -PPL", test_set, ppl));
    out.push_back(Correlate("Accuracy & -TS", test_set, ts));
  }
  return out;
}

std::vector<CorrelationRow> CorrelateJudge(const std::vector<IntrinsicReport>& intrinsic,
                                           const std::vector<JudgeSummary>& judge,
                                           const std::vector<std::string>& include) {
  auto gens = ByGenerator(intrinsic, include);
  std::vector<std::pair<double, double>> fl_fr, ua_ts, rs_ppl;
  std::set<std::string> seen;
  for (const auto& j : judge) {
    if (!seen.insert(j.generator).second) {
      throw InvalidArgument("generator " + j.generator + " has more than one judge summary");
    }
    auto it = gens.find(j.generator);
    if (it == gens.end()) continue;
    const IntrinsicReport& r = *it->second;
    if (j.fl && r.fr) fl_fr.emplace_back(*j.fl, *r.fr);
    if (j.ua && r.ts) ua_ts.emplace_back(*j.ua, -*r.ts);
    if (j.rs && r.ppl) rs_ppl.emplace_back(*j.rs, -*r.ppl);
  }
  return {Correlate("FL & FR", "all", fl_fr), Correlate("UA & -TS", "all", ua_ts),
          Correlate("RS & -PPL", "all", rs_ppl)};
}

std::string RenderCell(const Cell& cell) {
  if (std::holds_alternative<std::monostate>(cell)) return "—";
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  if (const auto* i = std::get_if<int64_t>(&cell)) return std::to_string(*i);
  return FormatFixed2(std::get<double>(cell));
}

namespace {

std::string CsvEscape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string MdEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

void CheckShape(const ReportTable& t) {
  for (const auto& row : t.rows) {
    if (row.size() != t.columns.size()) {
      throw InvalidArgument("report row width does not match the " + t.schema + " schema");
    }
  }
}

}  // namespace

std::string RenderCsv(const ReportTable& table) {
  CheckShape(table);
  std::string out;
  std::vector<std::string> cells;
  for (const auto& c : table.columns) cells.push_back(CsvEscape(c));
  out += Join(cells, ",") + "\n";
  for (const auto& row : table.rows) {
    cells.clear();
    for (const auto& c : row) cells.push_back(CsvEscape(RenderCell(c)));
    out += Join(cells, ",") + "\n";
  }
  return out;
}

std::string RenderMarkdown(const ReportTable& table) {
  CheckShape(table);
  std::string out = "|";
  for (const auto& c : table.columns) out += " " + MdEscape(c) + " |";
  out += "\n|";
  for (size_t i = 0; i < table.columns.size(); ++i) out += " --- |";
  out += "\n";
  for (const auto& row : table.rows) {
    out += "|";
    for (const auto& c : row) out += " " + MdEscape(RenderCell(c)) + " |";
    out += "\n";
  }
  return out;
}

namespace {

Cell Count(size_t n) { return Cell(static_cast<int64_t>(n)); }

}  // namespace

ReportTable IntrinsicTable(const std::vector<IntrinsicReport>& reports) {
  ReportTable t{"intrinsic",
                {"generator", "dataset", "n_ok", "PPL", "TS", "FR", "n_violation",
                 "n_refusal", "n_transport"},
                {}};
  for (const auto& r : reports) {
    t.rows.push_back({r.generator, r.dataset, Count(r.n_ok), OptionalCell(r.ppl),
                      OptionalCell(r.ts), OptionalCell(r.fr),
                      Count(r.excluded.template_violation), Count(r.excluded.refusal),
                      Count(r.excluded.transport_failure)});
  }
  return t;
}

ReportTable SuccessTable(const std::vector<IntrinsicReport>& reports) {
  ReportTable t{"success", {"generator", "dataset", "n_total", "n_ok", "success_rate"}, {}};
  for (const auto& r : reports) {
    size_t total = r.n_ok + r.excluded.total();
    t.rows.push_back({r.generator, r.dataset, Count(total), Count(r.n_ok),
                      OptionalCell(Percentage(r.n_ok, total))});
  }
  return t;
}

ReportTable DistributionTable(const std::vector<JudgeTableRow>& rows) {
  ReportTable t{"judge",
                {"generator", "dataset", "field", "set", "aspect", "1", "2", "3", "4",
                 "1&2", "3&4", "Avg.", "n_parsed", "n_failed"},
                {}};
  for (const auto& r : rows) {
    std::vector<Cell> row = {r.generator, r.dataset, r.field, r.set, r.aspect};
    if (r.dist) {
      const auto& d = *r.dist;
      for (double p : d.pct) row.push_back(p);
      row.insert(row.end(), {d.pct_12, d.pct_34, d.avg, Count(d.n_parsed)});
    } else {
      row.resize(row.size() + 7);
      row.push_back(Count(0));
    }
    row.push_back(Count(r.n_failed));
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable ClassifyTable(const std::vector<ClassifyTableRow>& rows) {
  ReportTable t{"judge_classify",
                {"generator", "dataset", "field", "Accuracy", "n_correct", "n_parsed",
                 "n_failed"},
                {}};
  for (const auto& r : rows) {
    t.rows.push_back({r.generator, r.dataset, r.field, OptionalCell(r.acc.accuracy),
                      Count(r.acc.n_correct), Count(r.acc.n_parsed), Count(r.acc.n_failed)});
  }
  return t;
}

ReportTable JudgeAverageTable(const std::vector<JudgeSummary>& rows) {
  ReportTable t{"judge_avg", {"generator", "set", "FL", "UA", "RS", "Avg."}, {}};
  for (const auto& r : rows) {
    std::optional<double> avg;
    if (r.fl && r.ua && r.rs) avg = AverageScores(*r.fl, *r.ua, *r.rs);
    t.rows.push_back({r.generator, r.set, OptionalCell(r.fl), OptionalCell(r.ua),
                      OptionalCell(r.rs), OptionalCell(avg)});
  }
  return t;
}

ReportTable CorrelationTable(const std::vector<CorrelationRow>& rows) {
  ReportTable t{"correlation", {"pair", "scope", "rho", "n"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({r.label, r.scope, OptionalCell(r.rho), Count(r.n)});
  }
  return t;
}

}  // namespace cfx
