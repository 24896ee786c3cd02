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

#ifndef CFX_RETRIEVAL_H_
#define CFX_RETRIEVAL_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfx/corpus.h"
#include "cfx/providers.h"
#include "cfx/records.h"

namespace cfx {

// A human factual/counterfactual pair shown as the worked example.
struct DemoPair {
  FactualInstance factual;
  std::string cf_id;
  std::string counterfactual_text;
  Field edited_field = Field::kText;
  std::string target_label;
};

struct IndexEntry {
  std::string id;
  EmbeddingVector vector;
  std::vector<DemoPair> demos;  // every human CF of this factual, by cf_id
};

// Immutable after construction; safe to query from several threads.
class EmbeddingIndex {
 public:
  // Throws DataError on duplicate ids, entries without demos, or mixed
  // vector dimensions.
  explicit EmbeddingIndex(std::vector<IndexEntry> entries);

  const std::vector<IndexEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  size_t dimension() const { return entries_.empty() ? 0 : entries_[0].vector.dimension(); }

 private:
  std::vector<IndexEntry> entries_;
};

// Text embedded for matching: the text itself, or "premise [SEP] hypothesis".
std::string EmbeddingText(const Task& task, const FactualInstance& instance);

// One entry per reference factual. Every factual needs at least one ok human
// counterfactual; only ok records are used.
EmbeddingIndex BuildIndex(const Task& task, const DatasetSplit& reference,
                          const std::vector<CounterfactualRecord>& human_cfs,
                          Embedder& embedder);

// <u,v> / (|u| |v|), or -1 when either vector has zero norm.
double CosineSimilarity(const EmbeddingVector& u, const EmbeddingVector& v);

struct Neighbor {
  size_t index = 0;
  double similarity = -1.0;
};

// Exhaustive scan for the highest cosine similarity; equal similarities go
// to the lexicographically smallest id. Throws InvalidArgument on an empty
// index and ProtocolError on a dimension mismatch.
Neighbor NearestEntry(const EmbeddingIndex& index, const EmbeddingVector& query);

// Among an entry's demos: those editing `edited_field` when any do, then the
// one whose target equals `target_label`, else the first by cf_id.
const DemoPair& ChooseDemo(const IndexEntry& entry, const std::string& target_label,
                           Field edited_field);

DemoPair NearestDemo(const EmbeddingIndex& index, const Task& task,
                     const FactualInstance& query, const std::string& target_label,
                     Field edited_field, Embedder& embedder);

// Line-delimited {"id", "vector", "demo": [...]} records.
void SaveIndex(const std::filesystem::path& path, const EmbeddingIndex& index,
               const Task& task);
EmbeddingIndex LoadIndex(const std::filesystem::path& path, const Task& task);

}  // namespace cfx

#endif  // CFX_RETRIEVAL_H_
