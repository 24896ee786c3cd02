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

#include "cfx/retrieval.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cfx/error.h"

namespace cfx {

EmbeddingIndex::EmbeddingIndex(std::vector<IndexEntry> entries)
    : entries_(std::move(entries)) {
  std::set<std::string> ids;
  for (auto& e : entries_) {
    if (!ids.insert(e.id).second) throw DataError("duplicate index id \"" + e.id + "\"");
    if (e.demos.empty()) throw DataError("index entry \"" + e.id + "\" has no demo");
    if (e.vector.dimension() != entries_.front().vector.dimension()) {
      throw DataError("index entry \"" + e.id + "\" has dimension " +
                      std::to_string(e.vector.dimension()) + ", expected " +
                      std::to_string(entries_.front().vector.dimension()));
    }
    std::sort(e.demos.begin(), e.demos.end(),
              [](const DemoPair& a, const DemoPair& b) { return a.cf_id < b.cf_id; });
  }
}

std::string EmbeddingText(const Task& task, const FactualInstance& instance) {
  if (task.is_pair()) return instance.premise + " [SEP] " + instance.hypothesis;
  return instance.text;
}

EmbeddingIndex BuildIndex(const Task& task, const DatasetSplit& reference,
                          const std::vector<CounterfactualRecord>& human_cfs,
                          Embedder& embedder) {
  if (reference.instances.empty()) throw DataError("reference split is empty");
  auto violations = ValidatePairing(task, reference, human_cfs);
  if (!violations.empty()) {
    throw DataError("reference counterfactual " + violations.front().cf_id + " " +
                    violations.front().message);
  }
  std::map<std::string, std::vector<const CounterfactualRecord*>> by_factual;
  for (const auto& cf : human_cfs) {
    if (cf.ok()) by_factual[cf.factual_id].push_back(&cf);
  }
  std::vector<std::string> texts;
  for (const auto& inst : reference.instances) {
    if (by_factual.count(inst.id) == 0) {
      throw DataError("reference instance \"" + inst.id + "\" has no human counterfactual");
    }
    texts.push_back(EmbeddingText(task, inst));
  }
  constexpr size_t kBatch = 64;
  std::vector<EmbeddingVector> vectors;
  for (size_t start = 0; start < texts.size(); start += kBatch) {
    std::vector<std::string> batch(
        texts.begin() + static_cast<std::ptrdiff_t>(start),
        texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), start + kBatch)));
    auto part = embedder.Embed(batch);
    if (!vectors.empty() && part.front().dimension() != vectors.front().dimension()) {
      throw ProtocolError("embedding dimension changed between batches");
    }
    vectors.insert(vectors.end(), part.begin(), part.end());
  }
  std::vector<IndexEntry> entries;
  for (size_t i = 0; i < reference.instances.size(); ++i) {
    const auto& inst = reference.instances[i];
    IndexEntry entry;
    entry.id = inst.id;
    entry.vector = std::move(vectors[i]);
    for (const auto* cf : by_factual[inst.id]) {
      entry.demos.push_back(
          DemoPair{inst, cf->cf_id, cf->text, cf->edited_field, cf->target_label});
    }
    entries.push_back(std::move(entry));
  }
  return EmbeddingIndex(std::move(entries));
}

double CosineSimilarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dimension() != v.dimension()) {
    throw ProtocolError("cosine of vectors with dimensions " +
                        std::to_string(u.dimension()) + " and " +
                        std::to_string(v.dimension()));
  }
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (size_t i = 0; i < u.values.size(); ++i) {
    dot += u.values[i] * v.values[i];
    nu += u.values[i] * u.values[i];
    nv += v.values[i] * v.values[i];
  }
  if (nu == 0.0 || nv == 0.0) return -1.0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

Neighbor NearestEntry(const EmbeddingIndex& index, const EmbeddingVector& query) {
  if (index.size() == 0) throw InvalidArgument("nearest neighbour in an empty index");
  const auto& entries = index.entries();
  Neighbor best;
  for (size_t i = 0; i < entries.size(); ++i) {
    double sim = CosineSimilarity(query, entries[i].vector);
    if (i == 0 || sim > best.similarity ||
        (sim == best.similarity && entries[i].id < entries[best.index].id)) {
      best = {i, sim};
    }
  }
  return best;
}

const DemoPair& ChooseDemo(const IndexEntry& entry, const std::string& target_label,
                           Field edited_field) {
  std::vector<const DemoPair*> pool;
  for (const auto& d : entry.demos) {
    if (d.edited_field == edited_field) pool.push_back(&d);
  }
  if (pool.empty()) {
    for (const auto& d : entry.demos) pool.push_back(&d);
  }
  for (const auto* d : pool) {
    if (d->target_label == target_label) return *d;
  }
  return *pool.front();
}

DemoPair NearestDemo(const EmbeddingIndex& index, const Task& task,
                     const FactualInstance& query, const std::string& target_label,
                     Field edited_field, Embedder& embedder) {
  if (index.size() == 0) throw InvalidArgument("nearest demo in an empty index");
  EmbeddingVector q = embedder.Embed({EmbeddingText(task, query)}).front();
  Neighbor n = NearestEntry(index, q);
  return ChooseDemo(index.entries()[n.index], target_label, edited_field);
}

void SaveIndex(const std::filesystem::path& path, const EmbeddingIndex& index,
               const Task& task) {
  std::vector<ojson> rows;
  for (const auto& e : index.entries()) {
    ojson row = ojson::object();
    row["id"] = e.id;
    row["vector"] = e.vector.values;
    ojson demos = ojson::array();
    for (const auto& d : e.demos) {
      ojson demo = ojson::object();
      demo["cf_id"] = d.cf_id;
      demo["factual"] = InstanceToJson(d.factual, task);
      demo["counterfactual_text"] = d.counterfactual_text;
      demo["edited_field"] = std::string(FieldName(d.edited_field));
      demo["target_label"] = d.target_label;
      demos.push_back(std::move(demo));
    }
    row["demo"] = std::move(demos);
    rows.push_back(std::move(row));
  }
  WriteJsonl(path, rows);
}

EmbeddingIndex LoadIndex(const std::filesystem::path& path, const Task& task) {
  std::vector<IndexEntry> entries;
  ForEachJsonLine(path, [&](size_t line, const ojson& row) {
    std::string where = path.string() + ":" + std::to_string(line);
    try {
      IndexEntry e;
      e.id = row.at("id").get<std::string>();
      e.vector.values = row.at("vector").get<std::vector<double>>();
      for (const auto& d : row.at("demo")) {
        DemoPair demo;
        demo.cf_id = d.at("cf_id").get<std::string>();
        const auto& f = d.at("factual");
        demo.factual.id = f.at("id").get<std::string>();
        demo.factual.label = f.at("label").get<std::string>();
        if (task.is_pair()) {
          demo.factual.premise = f.at("premise").get<std::string>();
          demo.factual.hypothesis = f.at("hypothesis").get<std::string>();
        } else {
          demo.factual.text = f.at("text").get<std::string>();
        }
        demo.counterfactual_text = d.at("counterfactual_text").get<std::string>();
        auto field = ParseField(d.at("edited_field").get<std::string>());
        if (!field) throw DataError(where + ": bad edited_field");
        demo.edited_field = *field;
        demo.target_label = d.at("target_label").get<std::string>();
        e.demos.push_back(std::move(demo));
      }
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(where + ": malformed index record: " + ex.what());
    }
  });
  return EmbeddingIndex(std::move(entries));
}

}  // namespace cfx
