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

#include <atomic>

#include "cfx/error.h"
#include "cfx/genpipe.h"
#include "test_util.h"

namespace cfx {
namespace {

using testing::Cf;
using testing::MockConfig;
using testing::Pair;
using testing::Single;

size_t Count(const std::string& hay, const std::string& needle) {
  size_t n = 0;
  for (size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

DemoPair SaDemo() {
  DemoPair d;
  d.factual = Single("d1", "the acting was wonderful", "positive");
  d.cf_id = "human/d1/text/negative";
  d.counterfactual_text = "the acting was dreadful";
  d.target_label = "negative";
  return d;
}

DemoPair NliDemo() {
  DemoPair d;
  d.factual = Pair("d2", "A man is sleeping.", "A person rests.", "entailment");
  d.cf_id = "human/d2/premise/contradiction";
  d.counterfactual_text = "A man is running.";
  d.edited_field = Field::kPremise;
  d.target_label = "contradiction";
  return d;
}

TEST(Template, DefaultMatchesShippedFile) {
  auto file = PromptTemplate::Load(testing::SourcePath("templates/generate_v1.toml"));
  auto def = PromptTemplate::Default();
  EXPECT_EQ(file.version, def.version);
  EXPECT_EQ(file.task_instruction, def.task_instruction);
  EXPECT_EQ(file.step_texts, def.step_texts);
  EXPECT_EQ(file.demo_rendering, def.demo_rendering);
  EXPECT_EQ(file.query_rendering, def.query_rendering);
  EXPECT_EQ(file.single_original, def.single_original);
  EXPECT_EQ(file.pair_original, def.pair_original);
  EXPECT_EQ(file.editable_role, def.editable_role);
  EXPECT_EQ(file.fixed_role, def.fixed_role);
  EXPECT_EQ(file.repair_instruction, def.repair_instruction);
  EXPECT_EQ(file.markers.counterfactual, def.markers.counterfactual);
  EXPECT_NO_THROW(def.Validate());
}

TEST(Template, ValidationRejectsBrokenTemplates) {
  auto t = PromptTemplate::Default();
  t.step_texts[1] = "  ";
  EXPECT_THROW(t.Validate(), ConfigError);
  t = PromptTemplate::Default();
  t.markers.counterfactual = "";
  EXPECT_THROW(t.Validate(), ConfigError);
  t = PromptTemplate::Default();
  t.demo_rendering = "{original}";
  EXPECT_THROW(t.Validate(), ConfigError);
  t = PromptTemplate::Default();
  t.task_instruction += " Write Counterfactual: first.";
  EXPECT_THROW(t.Validate(), ConfigError);
  EXPECT_THROW(PromptTemplate::FromConfig(nlohmann::json::parse(R"({"steps":["a","b"]})")),
               ConfigError);
}

TEST(RenderFormat, PlaceholdersAndBraces) {
  EXPECT_EQ(RenderFormat("{a}-{b} {{x}}", {{"a", "1"}, {"b", "2"}}), "1-2 {x}");
  EXPECT_THROW(RenderFormat("{nope}", {}), ConfigError);
}

TEST(DescribeEdits, GroupsAdjacentEdits) {
  auto d = DescribeEdits("the film was very good", "the film was not at all good");
  EXPECT_EQ(d.step1, "\"very\"");
  EXPECT_EQ(d.step2, "\"very\" -> \"not at all\"");
  auto same = DescribeEdits("a b", "a b");
  EXPECT_EQ(same.step1, "(none)");
  EXPECT_EQ(same.step2, "(none)");
  auto two = DescribeEdits("good plot and good cast", "bad plot and bad cast");
  EXPECT_EQ(two.step1, "\"good\", \"good\"");
}

TEST(TargetLabel, Defaults) {
  Task sa = Task::Builtin("sa");
  EXPECT_EQ(DefaultTargetLabel(sa, "positive"), "negative");
  EXPECT_EQ(DefaultTargetLabel(sa, "negative"), "positive");
  Task nli = Task::Builtin("nli");
  EXPECT_EQ(DefaultTargetLabel(nli, "entailment"), "contradiction");
  EXPECT_EQ(DefaultTargetLabel(nli, "contradiction"), "entailment");
  EXPECT_EQ(DefaultTargetLabel(nli, "neutral"), "entailment");
  Task four("t", TaskKind::kSingleText, {"a", "b", "c", "d"});
  EXPECT_EQ(DefaultTargetLabel(four, "d"), "a");
  EXPECT_THROW(DefaultTargetLabel(sa, "meh"), InvalidArgument);
}

TEST(BuildPrompt, DeterministicWithSingleCfMarker) {
  Task sa = Task::Builtin("sa");
  auto tmpl = PromptTemplate::Default();
  auto q = Single("q1", "a charming story", "positive");
  auto p1 = BuildPrompt(tmpl, sa, SaDemo(), q, "negative", Field::kText);
  auto p2 = BuildPrompt(tmpl, sa, SaDemo(), q, "negative", Field::kText);
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(Count(p1, tmpl.markers.counterfactual), 1u);
  size_t instr = p1.find(tmpl.task_instruction);
  size_t step3 = p1.find(tmpl.step_texts[2]);
  size_t demo_cf = p1.find("the acting was dreadful");
  size_t query = p1.find("a charming story");
  EXPECT_EQ(instr, 0u);
  EXPECT_LT(step3, demo_cf);
  EXPECT_LT(demo_cf, query);
  EXPECT_THROW(BuildPrompt(tmpl, sa, SaDemo(), q, "positive", Field::kText), InvalidArgument);
  EXPECT_THROW(BuildPrompt(tmpl, sa, SaDemo(), q, "negative", Field::kPremise),
               InvalidArgument);
}

TEST(BuildPrompt, PairSnapshot) {
  Task nli = Task::Builtin("nli");
  auto tmpl = PromptTemplate::Default();
  auto q = Pair("q2", "Two dogs play in the snow.", "Animals are outside.", "entailment");
  std::string expected = tmpl.task_instruction + "\n" +
                         "Step 1: " + tmpl.step_texts[0] + "\n" +
                         "Step 2: " + tmpl.step_texts[1] + "\n" +
                         "Step 3: " + tmpl.step_texts[2] + "\n" +
                         "\n"
                         "Example:\n"
                         "Premise (edit this): A man is sleeping.\n"
                         "Hypothesis (keep unchanged): A person rests.\n"
                         "Label: entailment\n"
                         "Target label: contradiction\n"
                         "Step 1: \"sleeping.\"\n"
                         "Step 2: \"sleeping.\" -> \"running.\"\n"
                         "Counterfactual: A man is running.\n"
                         "\n"
                         "Now it is your turn.\n"
                         "Premise (edit this): Two dogs play in the snow.\n"
                         "Hypothesis (keep unchanged): Animals are outside.\n"
                         "Label: entailment\n"
                         "Target label: contradiction\n";
  EXPECT_EQ(BuildPrompt(tmpl, nli, NliDemo(), q, "contradiction", Field::kPremise), expected);

  auto hyp = BuildPrompt(tmpl, nli, NliDemo(), q, "contradiction", Field::kHypothesis);
  EXPECT_NE(hyp.find("Premise (keep unchanged): Two dogs play in the snow.\n"
                     "Hypothesis (edit this): Animals are outside."),
            std::string::npos);
  EXPECT_THROW(BuildPrompt(tmpl, nli, NliDemo(), q, "contradiction", Field::kText),
               InvalidArgument);
}

TEST(Extract, Cases) {
  const std::string cf = "Counterfactual:";
  EXPECT_EQ(ExtractCounterfactual("Step 1: x\nStep 2: y\nCounterfactual: a dull film", cf),
            "a dull film");
  EXPECT_FALSE(ExtractCounterfactual("Step 1: x\nStep 2: y", cf));
  EXPECT_FALSE(ExtractCounterfactual("Counterfactual:   \n", cf));
  EXPECT_EQ(ExtractCounterfactual("Counterfactual: echo\nCounterfactual: real one", cf),
            "real one");
  EXPECT_EQ(ExtractCounterfactual("Counterfactual: line one\nline two\n\nNote: extra", cf),
            "line one\nline two");
  EXPECT_EQ(ExtractCounterfactual("Counterfactual:\n  spaced out  \n", cf), "spaced out");
}

GenerationOptions SaOptions() {
  GenerationOptions o;
  o.run_id = "r";
  o.generator = "g";
  o.dataset = "sa";
  return o;
}

TEST(GenerateCf, StatusesAndRepair) {
  Task sa = Task::Builtin("sa");
  auto tmpl = PromptTemplate::Default();
  auto q = Single("q1", "a charming story", "positive");
  auto run = [&](std::function<std::string(const std::string&)> fn) {
    FunctionChat chat(MockConfig("f"), std::move(fn));
    return GenerateCf(chat, tmpl, sa, SaDemo(), q, "negative", Field::kText, "g");
  };

  auto ok = run([](const std::string&) {
    return "Step 1: \"charming\"\nStep 2: x\nCounterfactual: a tedious story";
  });
  EXPECT_EQ(ok.parse_status, ParseStatus::kOk);
  EXPECT_EQ(ok.text, "a tedious story");
  EXPECT_EQ(ok.cf_id, "g/q1/text/negative");

  int calls = 0;
  bool repair_seen = false;
  auto repaired = run([&](const std::string& prompt) -> std::string {
    ++calls;
    if (calls == 1) return "I think it is negative now.";
    repair_seen = prompt.find(tmpl.repair_instruction) != std::string::npos;
    return "Counterfactual: a tedious story";
  });
  EXPECT_EQ(calls, 2);
  EXPECT_TRUE(repair_seen);
  EXPECT_EQ(repaired.parse_status, ParseStatus::kOk);

  calls = 0;
  auto violated = run([&](const std::string&) {
    ++calls;
    return std::string("no template here");
  });
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(violated.parse_status, ParseStatus::kTemplateViolation);
  EXPECT_TRUE(violated.text.empty());
  EXPECT_EQ(violated.raw_response, "no template here");

  auto refused = run([](const std::string&) {
    return std::string("I cannot generate content like this.");
  });
  EXPECT_EQ(refused.parse_status, ParseStatus::kRefusal);
  EXPECT_FALSE(refused.raw_response.empty());

  auto down = run([](const std::string&) -> std::string { throw TransportError("offline"); });
  EXPECT_EQ(down.parse_status, ParseStatus::kTransportFailure);
  EXPECT_NE(down.raw_response.find("offline"), std::string::npos);
}

TEST(GenerateCf, PairCopiesCounterpart) {
  Task nli = Task::Builtin("nli");
  auto q = Pair("q2", "Two dogs play in the snow.", "Animals are outside.", "entailment");
  FunctionChat chat(MockConfig("f"), [](const std::string&) {
    return std::string("Counterfactual: No animals are outside.");
  });
  auto r = GenerateCf(chat, PromptTemplate::Default(), nli, NliDemo(), q, "contradiction",
                      Field::kHypothesis, "g");
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.counterpart, q.premise);
  EXPECT_EQ(r.text, "No animals are outside.");
}

TEST(SuccessRate, HandCounts) {
  std::vector<CounterfactualRecord> rs;
  for (int i = 0; i < 7; ++i) rs.push_back(Cf("o" + std::to_string(i), "f", "negative", "x"));
  rs.push_back(Cf("v1", "f", "negative", "", ParseStatus::kTemplateViolation));
  rs.push_back(Cf("v2", "f", "negative", "", ParseStatus::kTemplateViolation));
  rs.push_back(Cf("r1", "f", "negative", "", ParseStatus::kRefusal));
  EXPECT_EQ(SuccessRate(rs), 70.0);
  std::vector<CounterfactualRecord> refusals(4, Cf("r", "f", "negative", "", ParseStatus::kRefusal));
  EXPECT_EQ(SuccessRate(refusals), 0.0);
  EXPECT_EQ(SuccessRate(std::vector<CounterfactualRecord>(3, Cf("o", "f", "n", "x"))), 100.0);
  EXPECT_THROW(SuccessRate(std::vector<CounterfactualRecord>{}), InvalidArgument);
}

TEST(PlanRequests, OverrideSkipsMatchingFactuals) {
  Task nli = Task::Builtin("nli");
  DatasetSplit split;
  split.instances = {Pair("a", "p", "h", "entailment"), Pair("b", "p", "h", "neutral"),
                     Pair("c", "p", "h", "contradiction")};
  GenerationOptions o;
  o.edited_field = Field::kHypothesis;
  auto plain = PlanRequests(nli, split, o);
  ASSERT_EQ(plain.size(), 3u);
  EXPECT_EQ(plain[0].target_label, "contradiction");
  EXPECT_EQ(plain[1].target_label, "entailment");
  o.target_override = "neutral";
  auto forced = PlanRequests(nli, split, o);
  ASSERT_EQ(forced.size(), 2u);
  EXPECT_EQ(forced[0].factual->id, "a");
  EXPECT_EQ(forced[1].factual->id, "c");
  o.target_override = "other";
  EXPECT_THROW(PlanRequests(nli, split, o), InvalidArgument);
  o.target_override.reset();
  o.edited_field = Field::kText;
  EXPECT_THROW(PlanRequests(nli, split, o), InvalidArgument);
}

TEST(RunGeneration, OrderResumeAndParallelism) {
  Task sa = Task::Builtin("sa");
  DatasetSplit split;
  for (int i = 0; i < 9; ++i) {
    split.instances.push_back(
        Single("t" + std::to_string(i), "story number " + std::to_string(i), "positive"));
  }
  EmbeddingIndex index({IndexEntry{"d1", LetterFrequency(SaDemo().factual.text), {SaDemo()}}});
  auto embedder = MakeEmbedder(MockConfig("mock-letters"));
  auto cfg = MockConfig("f");
  cfg.parallelism = 4;
  std::atomic<int> calls{0};
  FunctionChat chat(cfg, [&](const std::string& prompt) {
    ++calls;
    size_t at = prompt.rfind("story number ");
    return "Counterfactual: sad " + prompt.substr(at, prompt.find('\n', at) - at);
  });
  std::vector<std::string> seen;
  auto run = RunGeneration(SaOptions(), sa, split, index, *embedder, chat,
                           PromptTemplate::Default(), {},
                           [&](const CounterfactualRecord& r) { seen.push_back(r.cf_id); });
  ASSERT_EQ(run.records.size(), 9u);
  EXPECT_EQ(calls.load(), 9);
  for (int i = 0; i < 9; ++i) {
    EXPECT_EQ(run.records[i].cf_id, "g/t" + std::to_string(i) + "/text/negative");
    EXPECT_EQ(run.records[i].text, "sad story number " + std::to_string(i));
    EXPECT_EQ(seen[i], run.records[i].cf_id);
  }

  std::vector<CounterfactualRecord> existing(run.records.begin(), run.records.begin() + 5);
  existing[0].text = "kept";
  seen.clear();
  calls = 0;
  auto resumed = RunGeneration(SaOptions(), sa, split, index, *embedder, chat,
                               PromptTemplate::Default(), existing,
                               [&](const CounterfactualRecord& r) { seen.push_back(r.cf_id); });
  EXPECT_EQ(calls.load(), 4);
  EXPECT_EQ(seen.size(), 4u);
  EXPECT_EQ(resumed.records[0].text, "kept");
  EXPECT_EQ(resumed.records[8].text, run.records[8].text);
}

}  // namespace
}  // namespace cfx
