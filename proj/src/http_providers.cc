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

// OpenAI-compatible HTTP clients and the JSON classification endpoint.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <algorithm>
#include <cstdlib>

#include "cfx/error.h"
#include "cfx/text.h"
#include "provider_impl.h"

namespace cfx {
namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(std::string host, double timeout_seconds)
      : host_(std::move(host)), timeout_(timeout_seconds) {}

  HttpResponse Post(const HttpRequest& request) override {
    // httplib::Client is not safe to share across threads; one per call.
    httplib::Client client(host_);
    auto secs = static_cast<time_t>(timeout_);
    auto usecs = static_cast<time_t>((timeout_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto res = client.Post(request.path, headers, request.body,
                           "application/json");
    if (!res) {
      throw TransportError("POST " + host_ + request.path + ": " +
                           httplib::to_string(res.error()));
    }
    return HttpResponse{res->status, res->body};
  }

 private:
  std::string host_;
  double timeout_;
};

// Shared request plumbing: auth header, retries, JSON decoding.
class JsonEndpoint {
 public:
  JsonEndpoint(const ProviderConfig& cfg, std::unique_ptr<HttpTransport> transport,
               Sleeper sleep)
      : cfg_(cfg), transport_(std::move(transport)), sleep_(std::move(sleep)) {
    path_prefix_ = SplitBaseUrl(cfg.base_url).second;
  }

  // Returns the decoded body and the number of retries used.
  std::pair<ojson, int> Post(const std::string& suffix, const ojson& body) {
    HttpRequest request;
    request.path = path_prefix_ + suffix;
    if (request.path.empty()) request.path = "/";
    request.body = ToJsonLine(body);
    if (!cfg_.auth_env_var.empty()) {
      const char* token = std::getenv(cfg_.auth_env_var.c_str());
      if (token == nullptr || *token == '\0') {
        throw AuthError(cfg_.name + ": environment variable " +
                        cfg_.auth_env_var + " is not set");
      }
      request.headers.emplace_back("Authorization", std::string("Bearer ") + token);
    }
    RetryResult result = PostWithRetries(*transport_, request, cfg_, sleep_);
    try {
      return {ojson::parse(result.response.body), result.retries};
    } catch (const nlohmann::json::parse_error&) {
      throw ProtocolError(cfg_.name + ": response from " + request.path +
                          " is not JSON");
    }
  }

 private:
  const ProviderConfig& cfg_;
  std::unique_ptr<HttpTransport> transport_;
  Sleeper sleep_;
  std::string path_prefix_;
};

class OpenAiChat : public ChatProvider {
 public:
  OpenAiChat(const ProviderConfig& cfg, std::unique_ptr<HttpTransport> transport,
             Sleeper sleep)
      : ChatProvider(cfg), endpoint_(config(), std::move(transport), std::move(sleep)) {}

 protected:
  RawReply Fetch(const std::string& prompt) override {
    ojson body = ojson::object();
    body["model"] = config().model_name;
    body["messages"] = ojson::array({ojson{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = config().temperature;
    body["max_tokens"] = config().max_output_tokens;
    ojson response;
    int retries = 0;
    try {
      std::tie(response, retries) = endpoint_.Post("/chat/completions", body);
    } catch (const ProtocolError& e) {
      throw TransportError(e.what());
    }
    try {
      const ojson& choice = response.at("choices").at(0);
      const ojson& message = choice.at("message");
      RawReply reply;
      reply.retries = retries;
      if (message.contains("content") && message["content"].is_string()) {
        reply.text = message["content"].get<std::string>();
      }
      if (message.contains("refusal") && message["refusal"].is_string()) {
        reply.refused = true;
        if (reply.text.empty()) reply.text = message["refusal"].get<std::string>();
      }
      if (choice.value("finish_reason", "") == "content_filter") {
        reply.refused = true;
      }
      return reply;
    } catch (const nlohmann::json::exception&) {
      throw TransportError(config().name + ": chat response lacks choices[0].message");
    }
  }

 private:
  JsonEndpoint endpoint_;
};

class OpenAiEmbedder : public Embedder {
 public:
  OpenAiEmbedder(const ProviderConfig& cfg,
                 std::unique_ptr<HttpTransport> transport, Sleeper sleep)
      : Embedder(cfg), endpoint_(config(), std::move(transport), std::move(sleep)) {}

 protected:
  std::vector<EmbeddingVector> Fetch(const std::vector<std::string>& texts) override {
    ojson body = ojson::object();
    body["model"] = config().model_name;
    body["input"] = texts;
    ojson response = endpoint_.Post("/embeddings", body).first;
    try {
      const ojson& data = response.at("data");
      std::vector<EmbeddingVector> out(data.size());
      std::vector<bool> seen(data.size(), false);
      for (size_t i = 0; i < data.size(); ++i) {
        size_t index = data[i].contains("index") ? data[i]["index"].get<size_t>() : i;
        if (index >= out.size() || seen[index]) {
          throw ProtocolError(config().name + ": bad embedding index");
        }
        seen[index] = true;
        out[index].values = data[i].at("embedding").get<std::vector<double>>();
      }
      return out;
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError(config().name + ": malformed embeddings response");
    }
  }

 private:
  JsonEndpoint endpoint_;
};

// Uses the completions endpoint with echo=true so the prompt tokens come back
// with their conditional logprobs. The first token has no left context and
// is reported as null; it is dropped.
class OpenAiScorer : public TokenScorer {
 public:
  OpenAiScorer(const ProviderConfig& cfg, std::unique_ptr<HttpTransport> transport,
               Sleeper sleep)
      : TokenScorer(cfg), endpoint_(config(), std::move(transport), std::move(sleep)) {}

 protected:
  TokenLogprobs Fetch(const std::string& text) override {
    ojson body = ojson::object();
    body["model"] = config().model_name;
    body["prompt"] = text;
    body["max_tokens"] = 1;
    body["echo"] = true;
    body["logprobs"] = 0;
    body["temperature"] = 0.0;
    ojson response = endpoint_.Post("/completions", body).first;
    try {
      const ojson& lp = response.at("choices").at(0).at("logprobs");
      const ojson& tokens = lp.at("tokens");
      const ojson& values = lp.at("token_logprobs");
      const ojson* offsets = lp.contains("text_offset") ? &lp["text_offset"] : nullptr;
      TokenLogprobs out;
      for (size_t i = 0; i < tokens.size() && i < values.size(); ++i) {
        // Drop the generated continuation token.
        if (offsets != nullptr && i < offsets->size() &&
            (*offsets)[i].get<size_t>() >= text.size()) {
          break;
        }
        if (values[i].is_null()) continue;
        out.tokens.push_back(tokens[i].get<std::string>());
        out.logprobs.push_back(values[i].get<double>());
      }
      return out;
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError(config().name + ": malformed logprobs response");
    }
  }

 private:
  JsonEndpoint endpoint_;
};

class HttpClassifier : public Classifier {
 public:
  HttpClassifier(const ProviderConfig& cfg, const Task& task,
                 std::unique_ptr<HttpTransport> transport, Sleeper sleep)
      : Classifier(cfg, task), endpoint_(config(), std::move(transport), std::move(sleep)) {}

 protected:
  ClassifierPrediction Fetch(const ClassifierInput& input) override {
    ojson body = ojson::object();
    if (task().is_pair()) {
      body["premise"] = input.premise;
      body["hypothesis"] = input.hypothesis;
    } else {
      body["text"] = input.text;
    }
    ojson response = endpoint_.Post("", body).first;
    if (!response.is_object() || !response.contains("label") ||
        !response["label"].is_string()) {
      throw ProtocolError(config().name + ": classifier response lacks \"label\"");
    }
    ClassifierPrediction p;
    p.label = response["label"].get<std::string>();
    if (response.contains("scores") && !response["scores"].is_null()) {
      try {
        p.scores = response["scores"].get<std::map<std::string, double>>();
      } catch (const nlohmann::json::exception&) {
        throw ProtocolError(config().name + ": \"scores\" must map labels to numbers");
      }
    }
    return p;
  }

 private:
  JsonEndpoint endpoint_;
};

}  // namespace

std::unique_ptr<HttpTransport> MakeHttplibTransport(const std::string& base_url,
                                                    double timeout_seconds) {
  return std::make_unique<HttplibTransport>(SplitBaseUrl(base_url).first,
                                            timeout_seconds);
}

namespace internal {

std::unique_ptr<ChatProvider> NewOpenAiChat(
    const ProviderConfig& cfg, std::unique_ptr<HttpTransport> transport,
    Sleeper sleep) {
  return std::make_unique<OpenAiChat>(cfg, std::move(transport), std::move(sleep));
}

std::unique_ptr<Embedder> NewOpenAiEmbedder(
    const ProviderConfig& cfg, std::unique_ptr<HttpTransport> transport,
    Sleeper sleep) {
  return std::make_unique<OpenAiEmbedder>(cfg, std::move(transport), std::move(sleep));
}

std::unique_ptr<TokenScorer> NewOpenAiScorer(
    const ProviderConfig& cfg, std::unique_ptr<HttpTransport> transport,
    Sleeper sleep) {
  return std::make_unique<OpenAiScorer>(cfg, std::move(transport), std::move(sleep));
}

std::unique_ptr<Classifier> NewHttpClassifier(
    const ProviderConfig& cfg, const Task& task,
    std::unique_ptr<HttpTransport> transport, Sleeper sleep) {
  return std::make_unique<HttpClassifier>(cfg, task, std::move(transport),
                                          std::move(sleep));
}

}  // namespace internal
}  // namespace cfx
