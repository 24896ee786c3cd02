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

#ifndef CFX_PROVIDERS_H_
#define CFX_PROVIDERS_H_

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cfx/corpus.h"
#include "cfx/jsonl.h"

namespace cfx {

std::vector<std::string> DefaultRefusalMarkers();

// Connection and decoding settings for one external endpoint (or mock).
//
// Recognised kinds:
//   chat:        "openai", "mock-scripted", "mock-rewrite", "mock-judge"
//   embedding:   "openai", "mock-letters"
//   logprobs:    "openai", "mock-uniform", "mock-constant", "mock-hash"
//   classifier:  "http", "mock-lexicon", "mock-overlap"
// Kind-specific parameters live in `options`.
struct ProviderConfig {
  std::string name;
  std::string kind;
  std::string base_url;
  std::string model_name;
  // Name of the environment variable holding the bearer token; empty means
  // the endpoint needs no credentials.
  std::string auth_env_var;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double backoff_initial_seconds = 1.0;
  double backoff_max_seconds = 30.0;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  int parallelism = 1;
  std::vector<std::string> refusal_markers = DefaultRefusalMarkers();
  nlohmann::json options = nlohmann::json::object();

  bool is_mock() const { return kind.rfind("mock-", 0) == 0; }

  // Throws ConfigError when an invariant fails (parallelism < 1, ...).
  void Validate() const;
  static ProviderConfig FromConfig(const std::string& name,
                                   const nlohmann::json& table);
};

// ---------------------------------------------------------------------------
// Transport

struct HttpRequest {
  std::string path;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Throws TransportError when no HTTP response was obtained.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse Post(const HttpRequest& request) = 0;
};

// cpp-httplib backed transport. `base_url` is scheme://host[:port]; request
// paths are absolute.
std::unique_ptr<HttpTransport> MakeHttplibTransport(const std::string& base_url,
                                                    double timeout_seconds);

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper RealSleeper();

struct RetryResult {
  HttpResponse response;
  int retries = 0;
};

// POSTs with bounded exponential backoff. Transport errors, 429 and 5xx are
// retried up to cfg.max_retries times; 401/403 throw AuthError immediately;
// other non-2xx statuses throw TransportError without retrying.
RetryResult PostWithRetries(HttpTransport& transport, const HttpRequest& request,
                            const ProviderConfig& cfg, const Sleeper& sleep);

// Splits "http://host:8080/v1" into {"http://host:8080", "/v1"}.
std::pair<std::string, std::string> SplitBaseUrl(const std::string& url);

// ---------------------------------------------------------------------------
// Response cache

// Append-only on-disk cache: one line per stored response,
// {"digest", "request", "response", "ts"}. Safe for concurrent use within a
// process (single writer).
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path path);

  std::optional<ojson> Lookup(const std::string& digest) const;
  void Store(const std::string& digest, const ojson& request,
             const ojson& response);
  size_t size() const;

  // (provider kind, model, request) -> SHA-256 key.
  static std::string Digest(const ProviderConfig& cfg, const ojson& request);

 private:
  mutable std::mutex mu_;
  std::filesystem::path path_;
  std::unordered_map<std::string, ojson> entries_;
  std::unique_ptr<JsonlAppender> appender_;
};

// ---------------------------------------------------------------------------
// Chat completion

struct ChatOutcome {
  enum class Status { kOk, kRefusal, kTransportFailure };
  Status status = Status::kOk;
  std::string text;
  int retries = 0;
  std::string error;

  bool ok() const { return status == Status::kOk; }
};

// What an implementation returns for one prompt before refusal screening.
struct RawReply {
  std::string text;
  int retries = 0;
  // The provider itself flagged the answer as a refusal (content filter).
  bool refused = false;
};

class ChatProvider {
 public:
  explicit ChatProvider(ProviderConfig cfg);
  virtual ~ChatProvider() = default;

  // Never throws for transport trouble: failures come back as
  // kTransportFailure, refusals as kRefusal. AuthError and ConfigError do
  // propagate since no later request could succeed either.
  ChatOutcome Complete(const std::string& prompt);

  const ProviderConfig& config() const { return cfg_; }
  void set_cache(std::shared_ptr<ResponseCache> cache) { cache_ = std::move(cache); }

 protected:
  // May throw TransportError.
  virtual RawReply Fetch(const std::string& prompt) = 0;

 private:
  ProviderConfig cfg_;
  std::shared_ptr<ResponseCache> cache_;
};

bool ContainsRefusalMarker(const std::string& text,
                           const std::vector<std::string>& markers);

// Test and scripting helper: answers with fn(prompt).
class FunctionChat : public ChatProvider {
 public:
  FunctionChat(ProviderConfig cfg,
               std::function<std::string(const std::string&)> fn);

 protected:
  RawReply Fetch(const std::string& prompt) override;

 private:
  std::function<std::string(const std::string&)> fn_;
};

// Answers from a table keyed by SHA-256 of the prompt. Unknown prompts get
// options.fallback when set, and a transport failure otherwise.
class ScriptedChat : public ChatProvider {
 public:
  ScriptedChat(ProviderConfig cfg, std::map<std::string, std::string> by_digest);
  // Script file lines: {"prompt": str, "response": str} or
  // {"digest": str, "response": str}.
  static std::map<std::string, std::string> LoadScript(
      const std::filesystem::path& path);

 protected:
  RawReply Fetch(const std::string& prompt) override;

 private:
  std::map<std::string, std::string> by_digest_;
};

// ---------------------------------------------------------------------------
// Embeddings

struct EmbeddingVector {
  std::vector<double> values;

  size_t dimension() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

class Embedder {
 public:
  explicit Embedder(ProviderConfig cfg);
  virtual ~Embedder() = default;

  // One vector per text, in input order, all of one dimension and finite.
  // Throws InvalidArgument on an empty batch, ProtocolError on a shape
  // mismatch.
  std::vector<EmbeddingVector> Embed(const std::vector<std::string>& texts);

  const ProviderConfig& config() const { return cfg_; }
  void set_cache(std::shared_ptr<ResponseCache> cache) { cache_ = std::move(cache); }

 protected:
  virtual std::vector<EmbeddingVector> Fetch(
      const std::vector<std::string>& texts) = 0;

 private:
  ProviderConfig cfg_;
  std::shared_ptr<ResponseCache> cache_;
};

class FunctionEmbedder : public Embedder {
 public:
  FunctionEmbedder(ProviderConfig cfg,
                   std::function<EmbeddingVector(const std::string&)> fn);

 protected:
  std::vector<EmbeddingVector> Fetch(
      const std::vector<std::string>& texts) override;

 private:
  std::function<EmbeddingVector(const std::string&)> fn_;
};

// 26-dimensional a..z occurrence counts (ASCII, case-folded).
EmbeddingVector LetterFrequency(const std::string& text);

// ---------------------------------------------------------------------------
// Token scoring

struct TokenLogprobs {
  std::vector<std::string> tokens;
  // log p(token_i | tokens before i), natural log.
  std::vector<double> logprobs;
};

class TokenScorer {
 public:
  explicit TokenScorer(ProviderConfig cfg);
  virtual ~TokenScorer() = default;

  // Throws InvalidArgument on empty text; ProtocolError when the provider's
  // answer breaks the TokenLogprobs invariants.
  TokenLogprobs Score(const std::string& text);

  const ProviderConfig& config() const { return cfg_; }
  void set_cache(std::shared_ptr<ResponseCache> cache) { cache_ = std::move(cache); }

 protected:
  virtual TokenLogprobs Fetch(const std::string& text) = 0;

 private:
  ProviderConfig cfg_;
  std::shared_ptr<ResponseCache> cache_;
};

// ---------------------------------------------------------------------------
// Classification

struct ClassifierInput {
  std::string text;  // SingleText
  std::string premise;  // PairText
  std::string hypothesis;  // PairText
};

struct ClassifierPrediction {
  std::string label;
  std::map<std::string, double> scores;  // may be empty
};

// Picks the label with the highest score; ties go to the earliest label in
// the task's label order. Labels missing from `scores` count as -inf.
std::string ArgmaxLabel(const Task& task,
                        const std::map<std::string, double>& scores);

class Classifier {
 public:
  Classifier(ProviderConfig cfg, Task task);
  virtual ~Classifier() = default;

  // Returns a canonical label of the task. Out-of-set labels, non-finite
  // scores, or a label that disagrees with argmax(scores) throw ProtocolError.
  ClassifierPrediction Classify(const ClassifierInput& input);

  const ProviderConfig& config() const { return cfg_; }
  const Task& task() const { return task_; }
  void set_cache(std::shared_ptr<ResponseCache> cache) { cache_ = std::move(cache); }

 protected:
  virtual ClassifierPrediction Fetch(const ClassifierInput& input) = 0;

 private:
  ProviderConfig cfg_;
  Task task_;
  std::shared_ptr<ResponseCache> cache_;
};

// Signed lexicon: net = sum of word weights over case-folded, punctuation-
// stripped whitespace tokens. scores[positive] = net, scores[negative] = -net,
// every other label 0.
class LexiconClassifier : public Classifier {
 public:
  LexiconClassifier(ProviderConfig cfg, Task task,
                    std::map<std::string, double> weights,
                    std::string positive_label, std::string negative_label);

 protected:
  ClassifierPrediction Fetch(const ClassifierInput& input) override;

 private:
  std::map<std::string, double> weights_;
  std::string positive_;
  std::string negative_;
};

// ---------------------------------------------------------------------------
// Factories. `transport` overrides the HTTP layer (tests); `sleep` overrides
// the backoff clock.

struct ProviderHooks {
  std::function<std::unique_ptr<HttpTransport>(const ProviderConfig&)> transport;
  Sleeper sleep;
};

std::unique_ptr<ChatProvider> MakeChatProvider(const ProviderConfig& cfg,
                                               const ProviderHooks& hooks = {});
std::unique_ptr<Embedder> MakeEmbedder(const ProviderConfig& cfg,
                                       const ProviderHooks& hooks = {});
std::unique_ptr<TokenScorer> MakeTokenScorer(const ProviderConfig& cfg,
                                             const ProviderHooks& hooks = {});
std::unique_ptr<Classifier> MakeClassifier(const ProviderConfig& cfg,
                                           const Task& task,
                                           const ProviderHooks& hooks = {});

}  // namespace cfx

#endif  // CFX_PROVIDERS_H_
