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


#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "cfx/error.h"
#include "cfx/providers.h"
#include "httplib.h"
#include "json.hpp"

namespace cfx {
namespace {

using nlohmann::json;

class LocalServer : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      auto body = json::parse(req.body);
      last_auth_ = req.get_header_value("Authorization");
      if (flaky_ > 0) {
        --flaky_;
        res.status = 429;
        return;
      }
      std::string prompt = body["messages"][0]["content"];
      json reply;
      if (prompt == "filter") {
        reply = {{"choices", {{{"message", {{"content", ""}}}, {"finish_reason", "content_filter"}}}}};
      } else {
        reply = {{"choices", {{{"message", {{"content", "re: " + prompt}}}, {"finish_reason", "stop"}}}}};
      }
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      auto body = json::parse(req.body);
      json data = json::array();
      // Reversed on purpose; the client must order by index.
      for (size_t i = body["input"].size(); i-- > 0;) {
        std::string s = body["input"][i];
        data.push_back({{"index", i}, {"embedding", {static_cast<double>(s.size()), 1.0}}});
      }
      res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    server_.Post("/v1/completions", [](const httplib::Request& req, httplib::Response& res) {
      auto body = json::parse(req.body);
      EXPECT_TRUE(body["echo"].get<bool>());
      std::string prompt = body["prompt"];
      json lp = {{"tokens", {"a", " b", " c"}},
                 {"token_logprobs", {nullptr, -1.0, -3.0}},
                 {"text_offset", {0, 1, 3}}};
      json reply = {{"choices", {{{"text", prompt}, {"logprobs", lp}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/classify", [](const httplib::Request& req, httplib::Response& res) {
      auto body = json::parse(req.body);
      std::string text = body.value("text", "");
      json reply = {{"label", text.find("good") != std::string::npos ? "Positive" : "negative"}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/auth", [](const httplib::Request&, httplib::Response& res) {
      res.status = 401;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  ProviderConfig Config(const std::string& kind, const std::string& path) const {
    ProviderConfig cfg;
    cfg.name = "local";
    cfg.kind = kind;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port_) + path;
    cfg.model_name = "local-model";
    cfg.timeout_seconds = 5;
    cfg.max_retries = 2;
    return cfg;
  }

  ProviderHooks NoSleep() const {
    ProviderHooks hooks;
    hooks.sleep = [](std::chrono::milliseconds) {};
    return hooks;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> flaky_{0};
  std::string last_auth_;
};

TEST_F(LocalServer, ChatRoundTripWithRetry) {
  flaky_ = 1;
  ::setenv("CFX_HTTP_TEST_KEY", "k1", 1);
  auto cfg = Config("openai", "/v1");
  cfg.auth_env_var = "CFX_HTTP_TEST_KEY";
  auto chat = MakeChatProvider(cfg, NoSleep());
  auto out = chat->Complete("hello");
  EXPECT_TRUE(out.ok());
  EXPECT_EQ(out.text, "re: hello");
  EXPECT_EQ(out.retries, 1);
  EXPECT_EQ(last_auth_, "Bearer k1");
  EXPECT_EQ(chat->Complete("filter").status, ChatOutcome::Status::kRefusal);
  ::unsetenv("CFX_HTTP_TEST_KEY");
}

TEST_F(LocalServer, RateLimitExhaustionIsTransportFailure) {
  flaky_ = 10;
  auto chat = MakeChatProvider(Config("openai", "/v1"), NoSleep());
  EXPECT_EQ(chat->Complete("x").status, ChatOutcome::Status::kTransportFailure);
}

TEST_F(LocalServer, EmbeddingsOrderedByIndex) {
  auto e = MakeEmbedder(Config("openai", "/v1"), NoSleep());
  auto out = e->Embed({"a", "abc"});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].values, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(out[1].values, (std::vector<double>{3.0, 1.0}));
}

TEST_F(LocalServer, ScorerSkipsUnscoredFirstToken) {
  auto s = MakeTokenScorer(Config("openai", "/v1"), NoSleep());
  auto lp = s->Score("a b c");
  EXPECT_EQ(lp.tokens, (std::vector<std::string>{" b", " c"}));
  EXPECT_EQ(lp.logprobs, (std::vector<double>{-1.0, -3.0}));
}

TEST_F(LocalServer, HttpClassifier) {
  auto c = MakeClassifier(Config("http", "/classify"), Task::Builtin("sa"), NoSleep());
  EXPECT_EQ(c->Classify({"a good film", "", ""}).label, "positive");
  EXPECT_EQ(c->Classify({"a dull film", "", ""}).label, "negative");
}

TEST_F(LocalServer, UnauthorizedPropagates) {
  auto c = MakeClassifier(Config("http", "/auth"), Task::Builtin("sa"), NoSleep());
  EXPECT_THROW(c->Classify({"x", "", ""}), AuthError);
}

TEST(HttpTransport, UnreachableHostIsTransportFailure) {
  ProviderConfig cfg;
  cfg.name = "dead";
  cfg.kind = "openai";
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.max_retries = 0;
  cfg.timeout_seconds = 2;
  ProviderHooks hooks;
  hooks.sleep = [](std::chrono::milliseconds) {};
  auto chat = MakeChatProvider(cfg, hooks);
  EXPECT_EQ(chat->Complete("x").status, ChatOutcome::Status::kTransportFailure);
}

}  // namespace
}  // namespace cfx
