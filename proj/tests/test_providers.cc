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

#include <cmath>
#include <deque>

#include "cfx/error.h"
#include "cfx/providers.h"
#include "test_util.h"

namespace cfx {
namespace {

using testing::MockConfig;
using testing::TempDir;

class ScheduleTransport : public HttpTransport {
 public:
  explicit ScheduleTransport(std::deque<HttpResponse> replies)
      : replies_(std::move(replies)) {}
  HttpResponse Post(const HttpRequest& request) override {
    requests.push_back(request);
    if (replies_.empty()) throw TransportError("connection refused");
    HttpResponse r = replies_.front();
    replies_.pop_front();
    return r;
  }
  std::vector<HttpRequest> requests;

 private:
  std::deque<HttpResponse> replies_;
};

ProviderConfig RemoteConfig() {
  ProviderConfig cfg;
  cfg.name = "remote";
  cfg.kind = "openai";
  cfg.base_url = "http://127.0.0.1:9/v1";
  cfg.model_name = "m";
  cfg.max_retries = 3;
  cfg.backoff_initial_seconds = 0.5;
  cfg.backoff_max_seconds = 1.5;
  return cfg;
}

TEST(Retry, SucceedsAfterTwoRateLimits) {
  ScheduleTransport t({{429, ""}, {429, ""}, {200, "ok"}});
  std::vector<int64_t> slept;
  auto r = PostWithRetries(t, {"/x", "{}", {}}, RemoteConfig(),
                           [&](std::chrono::milliseconds d) { slept.push_back(d.count()); });
  EXPECT_EQ(r.retries, 2);
  EXPECT_EQ(r.response.status, 200);
  EXPECT_EQ(r.response.body, "ok");
  EXPECT_EQ(slept, (std::vector<int64_t>{500, 1000}));
}

TEST(Retry, BackoffIsCapped) {
  ScheduleTransport t({{503, ""}, {503, ""}, {503, ""}, {200, ""}});
  std::vector<int64_t> slept;
  auto r = PostWithRetries(t, {"/x", "{}", {}}, RemoteConfig(),
                           [&](std::chrono::milliseconds d) { slept.push_back(d.count()); });
  EXPECT_EQ(r.retries, 3);
  EXPECT_EQ(slept, (std::vector<int64_t>{500, 1000, 1500}));
}

TEST(Retry, GivesUpAfterMaxRetries) {
  ScheduleTransport t({{500, ""}, {500, ""}, {500, ""}, {500, ""}, {200, ""}});
  EXPECT_THROW(PostWithRetries(t, {"/x", "{}", {}}, RemoteConfig(), nullptr),
               TransportError);
  EXPECT_EQ(t.requests.size(), 4u);
}

TEST(Retry, AuthFailsImmediately) {
  ScheduleTransport t({{401, ""}, {200, ""}});
  EXPECT_THROW(PostWithRetries(t, {"/x", "{}", {}}, RemoteConfig(), nullptr), AuthError);
  EXPECT_EQ(t.requests.size(), 1u);
}

TEST(Retry, ClientErrorIsNotRetried) {
  ScheduleTransport t({{400, "bad"}, {200, ""}});
  EXPECT_THROW(PostWithRetries(t, {"/x", "{}", {}}, RemoteConfig(), nullptr),
               TransportError);
  EXPECT_EQ(t.requests.size(), 1u);
}

TEST(Retry, ConnectionErrorsAreRetried) {
  ScheduleTransport t({});
  EXPECT_THROW(PostWithRetries(t, {"/x", "{}", {}}, RemoteConfig(), nullptr),
               TransportError);
  EXPECT_EQ(t.requests.size(), 4u);
}

TEST(SplitBaseUrl, PathAndHost) {
  EXPECT_EQ(SplitBaseUrl("http://h:8080/v1/"),
            (std::pair<std::string, std::string>{"http://h:8080", "/v1"}));
  EXPECT_EQ(SplitBaseUrl("https://h"), (std::pair<std::string, std::string>{"https://h", ""}));
}

TEST(ProviderConfig, FromConfigAndValidate) {
  auto table = nlohmann::json::parse(
      R"({"kind":"openai","base_url":"http://h/v1","model":"x","parallelism":4,
          "refusal_markers":["NOPE"],"options":{"a":1}})");
  auto cfg = ProviderConfig::FromConfig("p", table);
  EXPECT_EQ(cfg.model_name, "x");
  EXPECT_EQ(cfg.parallelism, 4);
  EXPECT_EQ(cfg.refusal_markers, std::vector<std::string>{"nope"});
  EXPECT_EQ(cfg.options["a"], 1);

  table["parallelism"] = 0;
  EXPECT_THROW(ProviderConfig::FromConfig("p", table), ConfigError);
  table["parallelism"] = 1;
  table.erase("base_url");
  EXPECT_THROW(ProviderConfig::FromConfig("p", table), ConfigError);
  EXPECT_THROW(MakeChatProvider(MockConfig("mock-nothing")), ConfigError);
  EXPECT_THROW(MakeEmbedder(MockConfig("mock-rewrite")), ConfigError);
}

TEST(Chat, RefusalMarkersAreCaseInsensitive) {
  FunctionChat chat(MockConfig("f"), [](const std::string&) {
    return "I'm sorry, but I CANNOT help with that.";
  });
  auto out = chat.Complete("hi");
  EXPECT_EQ(out.status, ChatOutcome::Status::kRefusal);
  FunctionChat fine(MockConfig("f"), [](const std::string& p) { return "echo " + p; });
  auto ok = fine.Complete("hi");
  EXPECT_TRUE(ok.ok());
  EXPECT_EQ(ok.text, "echo hi");
  EXPECT_THROW(fine.Complete(""), InvalidArgument);
}

TEST(Chat, TransportErrorBecomesOutcome) {
  FunctionChat chat(MockConfig("f"), [](const std::string&) -> std::string {
    throw TransportError("down");
  });
  auto out = chat.Complete("hi");
  EXPECT_EQ(out.status, ChatOutcome::Status::kTransportFailure);
  EXPECT_NE(out.error.find("down"), std::string::npos);
}

TEST(Chat, ScriptedByPromptAndFallback) {
  TempDir dir;
  testing::WriteFile(dir / "s.jsonl", R"({"prompt":"a","response":"A"})" "\n");
  auto cfg = MockConfig("mock-scripted", {{"script", (dir / "s.jsonl").string()}});
  auto chat = MakeChatProvider(cfg);
  EXPECT_EQ(chat->Complete("a").text, "A");
  EXPECT_EQ(chat->Complete("b").status, ChatOutcome::Status::kTransportFailure);
  cfg.options["fallback"] = "F";
  EXPECT_EQ(MakeChatProvider(cfg)->Complete("b").text, "F");
}

TEST(Cache, SecondCallIsServedFromDisk) {
  TempDir dir;
  int calls = 0;
  auto path = dir / "cache.jsonl";
  {
    FunctionChat chat(MockConfig("f"), [&](const std::string& p) {
      ++calls;
      return "r:" + p;
    });
    chat.set_cache(std::make_shared<ResponseCache>(path));
    EXPECT_EQ(chat.Complete("x").text, "r:x");
    EXPECT_EQ(chat.Complete("x").text, "r:x");
  }
  EXPECT_EQ(calls, 1);
  FunctionChat again(MockConfig("f"), [&](const std::string&) {
    ++calls;
    return std::string("fresh");
  });
  auto cache = std::make_shared<ResponseCache>(path);
  EXPECT_EQ(cache->size(), 1u);
  again.set_cache(cache);
  EXPECT_EQ(again.Complete("x").text, "r:x");
  EXPECT_EQ(calls, 1);
}

TEST(Cache, DigestDependsOnModelAndRequest) {
  auto a = MockConfig("k");
  auto b = a;
  b.model_name = "other";
  ojson req = {{"prompt", "p"}};
  ojson req2 = {{"prompt", "q"}};
  EXPECT_EQ(ResponseCache::Digest(a, req), ResponseCache::Digest(a, req));
  EXPECT_NE(ResponseCache::Digest(a, req), ResponseCache::Digest(b, req));
  EXPECT_NE(ResponseCache::Digest(a, req), ResponseCache::Digest(a, req2));
  EXPECT_EQ(ResponseCache::Digest(a, req).size(), 64u);
}

class FixedClassifier : public Classifier {
 public:
  FixedClassifier(Task task, ClassifierPrediction p)
      : Classifier(MockConfig("fixed"), std::move(task)), p_(std::move(p)) {}

 protected:
  ClassifierPrediction Fetch(const ClassifierInput&) override { return p_; }

 private:
  ClassifierPrediction p_;
};

TEST(Classifier, LabelValidation) {
  Task sa = Task::Builtin("sa");
  FixedClassifier upper(sa, {"POSITIVE", {}});
  EXPECT_EQ(upper.Classify({"t", "", ""}).label, "positive");
  FixedClassifier maybe(sa, {"maybe", {}});
  EXPECT_THROW(maybe.Classify({"t", "", ""}), ProtocolError);
  FixedClassifier disagree(sa, {"positive", {{"negative", 2.0}, {"positive", 1.0}}});
  EXPECT_THROW(disagree.Classify({"t", "", ""}), ProtocolError);
  FixedClassifier nan(sa, {"positive", {{"positive", std::nan("")}}});
  EXPECT_THROW(nan.Classify({"t", "", ""}), ProtocolError);
  EXPECT_THROW(upper.Classify({"", "", ""}), InvalidArgument);
  FixedClassifier pair(Task::Builtin("nli"), {"neutral", {}});
  EXPECT_THROW(pair.Classify({"", "p", ""}), InvalidArgument);
  EXPECT_EQ(pair.Classify({"", "p", "h"}).label, "neutral");
}

TEST(Classifier, ArgmaxTiesGoToFirstLabel) {
  Task nli = Task::Builtin("nli");
  EXPECT_EQ(ArgmaxLabel(nli, {{"contradiction", 1.0}, {"neutral", 1.0}}), "neutral");
  EXPECT_EQ(ArgmaxLabel(nli, {{"contradiction", 0.5}, {"neutral", 0.2}}), "contradiction");
  EXPECT_EQ(ArgmaxLabel(nli, {}), "entailment");
}

TEST(Classifier, Lexicon) {
  Task sa = Task::Builtin("sa");
  LexiconClassifier lex(MockConfig("lex"), sa, {{"great", 1.0}, {"awful", -1.0}},
                        "positive", "negative");
  auto p = lex.Classify({"Great, great... awful!", "", ""});
  EXPECT_EQ(p.label, "positive");
  EXPECT_DOUBLE_EQ(p.scores.at("positive"), 1.0);
  EXPECT_DOUBLE_EQ(p.scores.at("negative"), -1.0);
  EXPECT_EQ(lex.Classify({"great awful", "", ""}).label, "negative");
  EXPECT_EQ(lex.Classify({"nothing here", "", ""}).label, "negative");
}

TEST(Classifier, OverlapNeedsNliLabels) {
  EXPECT_THROW(MakeClassifier(MockConfig("mock-overlap"), Task::Builtin("sa")), ConfigError);
  auto c = MakeClassifier(MockConfig("mock-overlap"), Task::Builtin("nli"));
  auto p = c->Classify({"", "a cat sat on the mat", "a cat sat on the mat"});
  EXPECT_TRUE(Task::Builtin("nli").HasLabel(p.label));
}

TEST(Embedder, LetterFrequency) {
  auto v = LetterFrequency("Abba! z");
  ASSERT_EQ(v.dimension(), 26u);
  EXPECT_EQ(v.values[0], 2);
  EXPECT_EQ(v.values[1], 2);
  EXPECT_EQ(v.values[25], 1);
  double total = 0;
  for (double x : v.values) total += x;
  EXPECT_EQ(total, 5);
}

TEST(Embedder, BatchChecks) {
  auto e = MakeEmbedder(MockConfig("mock-letters"));
  EXPECT_THROW(e->Embed({}), InvalidArgument);
  auto out = e->Embed({"ab", "cd", "ab"});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], out[2]);
  int n = 0;
  FunctionEmbedder ragged(MockConfig("r"), [&](const std::string&) {
    return EmbeddingVector{std::vector<double>(static_cast<size_t>(1 + n++), 1.0)};
  });
  EXPECT_THROW(ragged.Embed({"a", "b"}), ProtocolError);
  FunctionEmbedder inf(MockConfig("r"), [](const std::string&) {
    return EmbeddingVector{{INFINITY}};
  });
  EXPECT_THROW(inf.Embed({"a"}), ProtocolError);
}

TEST(Scorer, UniformVocabulary) {
  auto s = MakeTokenScorer(MockConfig("mock-uniform", {{"vocab_size", 4}}));
  auto lp = s->Score("one two three");
  ASSERT_EQ(lp.tokens.size(), 3u);
  for (double x : lp.logprobs) EXPECT_NEAR(x, std::log(0.25), 1e-12);
  EXPECT_THROW(s->Score("   "), InvalidArgument);
  EXPECT_THROW(MakeTokenScorer(MockConfig("mock-uniform", {{"vocab_size", 0}})), ConfigError);
}

TEST(Scorer, ConstantAndHash) {
  auto c = MakeTokenScorer(MockConfig("mock-constant", {{"logprob", -2.0}}));
  EXPECT_EQ(c->Score("a b").logprobs, (std::vector<double>{-2.0, -2.0}));
  auto h = MakeTokenScorer(MockConfig("mock-hash"));
  auto a = h->Score("the film was fine");
  auto b = h->Score("the film was fine");
  EXPECT_EQ(a.logprobs, b.logprobs);
  for (double x : a.logprobs) {
    EXPECT_LE(x, -0.5);
    EXPECT_GE(x, -4.5);
  }
  EXPECT_THROW(MakeTokenScorer(MockConfig("mock-constant", {{"logprob", 0.5}})),
               ConfigError);
}

TEST(Scorer, OpenAiWithoutLogprobsIsRejected) {
  auto cfg = RemoteConfig();
  cfg.options = {{"logprobs", false}};
  EXPECT_THROW(MakeTokenScorer(cfg), ConfigError);
}

TEST(MockRewrite, AnswersInTemplate) {
  auto chat = MakeChatProvider(MockConfig("mock-rewrite"));
  auto out = chat->Complete("Text: the movie was good\nLabel: positive\nTarget label: negative");
  ASSERT_TRUE(out.ok());
  EXPECT_NE(out.text.find("Counterfactual:"), std::string::npos);
  EXPECT_EQ(out.text, chat->Complete("Text: the movie was good\nLabel: positive\n"
                                     "Target label: negative").text);
}

TEST(FakeTransport, ChatThroughHooks) {
  ::setenv("CFX_TEST_KEY", "secret", 1);
  auto cfg = RemoteConfig();
  cfg.auth_env_var = "CFX_TEST_KEY";
  ScheduleTransport* seen = nullptr;
  ProviderHooks hooks;
  hooks.transport = [&](const ProviderConfig&) {
    auto t = std::make_unique<ScheduleTransport>(std::deque<HttpResponse>{
        {429, ""},
        {200, R"({"choices":[{"message":{"content":"hello"},"finish_reason":"stop"}]})"}});
    seen = t.get();
    return t;
  };
  hooks.sleep = [](std::chrono::milliseconds) {};
  auto chat = MakeChatProvider(cfg, hooks);
  auto out = chat->Complete("hi");
  EXPECT_TRUE(out.ok());
  EXPECT_EQ(out.text, "hello");
  EXPECT_EQ(out.retries, 1);
  ASSERT_NE(seen, nullptr);
  ASSERT_EQ(seen->requests.size(), 2u);
  EXPECT_EQ(seen->requests[0].path, "/v1/chat/completions");
  bool has_auth = false;
  for (const auto& [k, v] : seen->requests[0].headers) {
    if (k == "Authorization" && v == "Bearer secret") has_auth = true;
  }
  EXPECT_TRUE(has_auth);
  ::unsetenv("CFX_TEST_KEY");
}

TEST(FakeTransport, MissingKeyIsAuthError) {
  ::unsetenv("CFX_TEST_MISSING_KEY");
  auto cfg = RemoteConfig();
  cfg.auth_env_var = "CFX_TEST_MISSING_KEY";
  ProviderHooks hooks;
  hooks.transport = [](const ProviderConfig&) {
    return std::make_unique<ScheduleTransport>(std::deque<HttpResponse>{});
  };
  EXPECT_THROW(
      {
        auto chat = MakeChatProvider(cfg, hooks);
        chat->Complete("hi");
      },
      AuthError);
}

}  // namespace
}  // namespace cfx
