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


#include <gtest/gtest.h>

#include <random>

#include "cfx/error.h"
#include "cfx/retrieval.h"
#include "oracles.h"
#include "test_util.h"

namespace cfx {
namespace {

using testing::Cf;
using testing::MockConfig;
using testing::OracleCosine;
using testing::Single;

DemoPair Demo(const std::string& id, const std::string& target = "negative",
              Field field = Field::kText, const std::string& suffix = "") {
  DemoPair d;
  d.factual = Single(id, "text of " + id, "positive");
  d.cf_id = "human/" + id + "/" + std::string(FieldName(field)) + "/" + target + suffix;
  d.counterfactual_text = "cf of " + id;
  d.edited_field = field;
  d.target_label = target;
  return d;
}

IndexEntry Entry(const std::string& id, std::vector<double> v) {
  return IndexEntry{id, EmbeddingVector{std::move(v)}, {Demo(id)}};
}

// Embeds a query by looking its text up in a fixed table.
FunctionEmbedder TableEmbedder(std::map<std::string, std::vector<double>> table) {
  return FunctionEmbedder(MockConfig("table"), [table](const std::string& text) {
    return EmbeddingVector{table.at(text)};
  });
}

TEST(Cosine, Values) {
  EXPECT_NEAR(CosineSimilarity({{1, 0}}, {{1, 0.1}}), 1 / std::sqrt(1.01), 1e-12);
  EXPECT_EQ(CosineSimilarity({{1, 0}}, {{0, 1}}), 0.0);
  EXPECT_EQ(CosineSimilarity({{0, 0}}, {{0, 1}}), -1.0);
  EXPECT_THROW(CosineSimilarity({{1}}, {{1, 0}}), ProtocolError);
}

TEST(Nearest, TwoDimensionalExample) {
  EmbeddingIndex index({Entry("first", {1, 0.1}), Entry("second", {0, 1})});
  auto n = NearestEntry(index, {{1, 0}});
  EXPECT_EQ(index.entries()[n.index].id, "first");
  EXPECT_NEAR(n.similarity, 0.995, 5e-4);
}

TEST(Nearest, TiesGoToSmallestId) {
  EmbeddingIndex index({Entry("zeta", {1, 1}), Entry("alpha", {1, 1}), Entry("mid", {0, 1})});
  EXPECT_EQ(index.entries()[NearestEntry(index, {{1, 1}}).index].id, "alpha");
  EmbeddingIndex zero({Entry("b", {0, 0}), Entry("a", {0, 0})});
  auto n = NearestEntry(zero, {{1, 1}});
  EXPECT_EQ(zero.entries()[n.index].id, "a");
  EXPECT_EQ(n.similarity, -1.0);
}

TEST(Nearest, EmptyIndexAndDimensionMismatch) {
  EmbeddingIndex empty({});
  EXPECT_THROW(NearestEntry(empty, {{1}}), InvalidArgument);
  EmbeddingIndex index({Entry("a", {1, 0})});
  EXPECT_THROW(NearestEntry(index, {{1, 0, 0}}), ProtocolError);
}

TEST(Nearest, AgreesWithExhaustiveScanAndIsScaleFree) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  Task sa = Task::Builtin("sa");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<IndexEntry> entries;
    for (int i = 0; i < 50; ++i) {
      std::vector<double> v(8);
      for (double& x : v) x = g(rng);
      char id[16];
      std::snprintf(id, sizeof id, "e%03d", (i * 37) % 50);
      entries.push_back(Entry(id, v));
    }
    std::vector<double> q(8);
    for (double& x : q) x = g(rng);

    size_t best = 0;
    double best_sim = -2;
    for (size_t i = 0; i < entries.size(); ++i) {
      double s = OracleCosine(q, entries[i].vector.values);
      if (s > best_sim || (s == best_sim && entries[i].id < entries[best].id)) {
        best = i;
        best_sim = s;
      }
    }
    std::string expected = entries[best].id;

    auto embedder = TableEmbedder({{"query", q}});
    EmbeddingIndex index(entries);
    auto demo = NearestDemo(index, sa, Single("q", "query", "positive"), "negative",
                            Field::kText, embedder);
    ASSERT_EQ(demo.factual.id, expected) << "trial " << trial;
    auto n = NearestEntry(index, {q});
    for (const auto& e : index.entries()) {
      EXPECT_GE(n.similarity + 1e-12, CosineSimilarity({q}, e.vector));
    }

    for (double c : {0.5, 3.0}) {
      auto scaled = entries;
      for (auto& e : scaled) {
        for (double& x : e.vector.values) x *= c;
      }
      EmbeddingIndex si(scaled);
      EXPECT_EQ(si.entries()[NearestEntry(si, {q}).index].id, expected);
    }
  }
}

TEST(ChooseDemo, PrefersFieldThenTarget) {
  IndexEntry e{"p", {{1}},
               {Demo("p", "contradiction", Field::kPremise),
                Demo("p", "neutral", Field::kHypothesis),
                Demo("p", "contradiction", Field::kHypothesis)}};
  EmbeddingIndex index({e});
  const auto& entry = index.entries()[0];
  auto& d1 = ChooseDemo(entry, "contradiction", Field::kHypothesis);
  EXPECT_EQ(d1.edited_field, Field::kHypothesis);
  EXPECT_EQ(d1.target_label, "contradiction");
  auto& d2 = ChooseDemo(entry, "entailment", Field::kHypothesis);
  EXPECT_EQ(d2.cf_id, "human/p/hypothesis/contradiction");
  auto& d3 = ChooseDemo(entry, "neutral", Field::kText);
  EXPECT_EQ(d3.cf_id, "human/p/hypothesis/neutral");
}

TEST(Index, ConstructorChecks) {
  EXPECT_THROW(EmbeddingIndex({Entry("a", {1}), Entry("a", {2})}), DataError);
  EXPECT_THROW(EmbeddingIndex({Entry("a", {1}), Entry("b", {1, 2})}), DataError);
  EXPECT_THROW(EmbeddingIndex({IndexEntry{"a", {{1}}, {}}}), DataError);
}

TEST(BuildIndex, LetterCountsAndErrors) {
  Task sa = Task::Builtin("sa");
  DatasetSplit ref;
  ref.instances = {Single("a", "aa b", "positive"), Single("b", "cc", "negative"),
                   Single("c", "zz", "positive")};
  std::vector<CounterfactualRecord> cfs = {Cf("h1", "a", "negative", "bb"),
                                           Cf("h2", "b", "positive", "dd"),
                                           Cf("h3", "c", "negative", "yy")};
  auto embedder = MakeEmbedder(MockConfig("mock-letters"));
  auto index = BuildIndex(sa, ref, cfs, *embedder);
  ASSERT_EQ(index.size(), 3u);
  EXPECT_EQ(index.entries()[0].vector, LetterFrequency("aa b"));
  EXPECT_EQ(index.entries()[0].vector.values[0], 2);
  EXPECT_EQ(index.entries()[1].demos[0].counterfactual_text, "dd");

  auto missing = cfs;
  missing.pop_back();
  try {
    BuildIndex(sa, ref, missing, *embedder);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("\"c\""), std::string::npos);
  }
  DatasetSplit empty;
  EXPECT_THROW(BuildIndex(sa, empty, cfs, *embedder), DataError);
}

TEST(BuildIndex, SelfQueryIsSelected) {
  Task sa = Task::Builtin("sa");
  DatasetSplit ref;
  ref.instances = {Single("a", "a quiet gentle film", "positive"),
                   Single("b", "zzz yyy xxx", "negative")};
  std::vector<CounterfactualRecord> cfs = {Cf("h1", "a", "negative", "x"),
                                           Cf("h2", "b", "positive", "y")};
  auto embedder = MakeEmbedder(MockConfig("mock-letters"));
  auto index = BuildIndex(sa, ref, cfs, *embedder);
  auto d = NearestDemo(index, sa, Single("q", "zzz yyy xxx", "negative"), "positive",
                       Field::kText, *embedder);
  EXPECT_EQ(d.factual.id, "b");
}

TEST(EmbeddingText, PairUsesSeparator) {
  EXPECT_EQ(EmbeddingText(Task::Builtin("nli"), testing::Pair("p", "A", "B", "neutral")),
            "A [SEP] B");
  EXPECT_EQ(EmbeddingText(Task::Builtin("sa"), Single("s", "T", "positive")), "T");
}

TEST(Index, SaveLoadRoundTrip) {
  testing::TempDir dir;
  Task nli = Task::Builtin("nli");
  DemoPair d;
  d.factual = testing::Pair("p1", "a dog runs", "an animal moves", "entailment");
  d.cf_id = "human/p1/hypothesis/contradiction";
  d.counterfactual_text = "an animal sleeps";
  d.edited_field = Field::kHypothesis;
  d.target_label = "contradiction";
  EmbeddingIndex index({IndexEntry{"p1", {{0.5, 0.25}}, {d}}});
  SaveIndex(dir / "i.jsonl", index, nli);
  auto back = LoadIndex(dir / "i.jsonl", nli);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back.entries()[0].vector, index.entries()[0].vector);
  const auto& bd = back.entries()[0].demos[0];
  EXPECT_EQ(bd.factual.premise, "a dog runs");
  EXPECT_EQ(bd.counterfactual_text, "an animal sleeps");
  EXPECT_EQ(bd.edited_field, Field::kHypothesis);
  SaveIndex(dir / "j.jsonl", back, nli);
  std::ifstream a(dir / "i.jsonl"), b(dir / "j.jsonl");
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
}

}  // namespace
}  // namespace cfx
