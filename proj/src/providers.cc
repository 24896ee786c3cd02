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

#include "cfx/providers.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <ctime>
#include <thread>

#include "cfx/config.h"
#include "cfx/error.h"
#include "cfx/text.h"

namespace cfx {

std::vector<std::string> DefaultRefusalMarkers() {
  return {
      "i cannot fulfill",
      "i can't fulfill",
      "i cannot generate",
      "i can't generate",
      "i cannot create",
      "i can't create",
      "i cannot assist",
      "i can't assist",
      "i cannot help with",
      "i can't help with",
      "i'm sorry, but i can",
      "i am sorry, but i can",
      "i apologize, but i can",
      "as an ai language model",
      "i am unable to",
      "i'm unable to",
      "i'm not able to provide",
  };
}

void ProviderConfig::Validate() const {
  auto fail = [&](const std::string& what) {
    throw ConfigError("provider '" + name + "': " + what);
  };
  if (kind.empty()) fail("missing kind");
  if (parallelism < 1) fail("parallelism must be >= 1");
  if (max_retries < 0) fail("max_retries must be >= 0");
  if (!(temperature >= 0.0)) fail("temperature must be >= 0");
  if (max_output_tokens < 1) fail("max_output_tokens must be positive");
  if (!(timeout_seconds > 0.0)) fail("timeout must be positive");
  if (backoff_initial_seconds < 0.0 || backoff_max_seconds < 0.0) {
    fail("backoff must be non-negative");
  }
  if (!is_mock() && base_url.empty()) fail("missing base_url");
}

ProviderConfig ProviderConfig::FromConfig(const std::string& name,
                                          const nlohmann::json& t) {
  ProviderConfig cfg;
  cfg.name = name;
  cfg.kind = GetString(t, "kind");
  cfg.base_url = GetString(t, "base_url");
  cfg.model_name = GetString(t, "model", name);
  cfg.auth_env_var = GetString(t, "auth_env_var");
  cfg.timeout_seconds = GetNumber(t, "timeout", cfg.timeout_seconds);
  cfg.max_retries = static_cast<int>(GetInt(t, "max_retries", cfg.max_retries));
  cfg.backoff_initial_seconds =
      GetNumber(t, "backoff_initial", cfg.backoff_initial_seconds);
  cfg.backoff_max_seconds = GetNumber(t, "backoff_max", cfg.backoff_max_seconds);
  cfg.temperature = GetNumber(t, "temperature", cfg.temperature);
  cfg.max_output_tokens =
      static_cast<int>(GetInt(t, "max_output_tokens", cfg.max_output_tokens));
  cfg.parallelism = static_cast<int>(GetInt(t, "parallelism", cfg.parallelism));
  if (const auto* markers = Find(t, "refusal_markers")) {
    if (!markers->is_array()) {
      throw ConfigError("provider '" + name + "': refusal_markers must be an array");
    }
    cfg.refusal_markers.clear();
    for (const auto& m : *markers) {
      cfg.refusal_markers.push_back(CaseFold(m.get<std::string>()));
    }
  }
  if (const auto* options = Find(t, "options")) cfg.options = *options;
  cfg.Validate();
  return cfg;
}

// ---------------------------------------------------------------------------

Sleeper RealSleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::pair<std::string, std::string> SplitBaseUrl(const std::string& url) {
  size_t scheme = url.find("://");
  size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  size_t slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  std::string path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

RetryResult PostWithRetries(HttpTransport& transport, const HttpRequest& request,
                            const ProviderConfig& cfg, const Sleeper& sleep) {
  RetryResult result;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      double delay = std::min(cfg.backoff_max_seconds,
                              cfg.backoff_initial_seconds *
                                  std::pow(2.0, static_cast<double>(attempt - 1)));
      spdlog::warn("{}: retry {}/{} after {:.2f}s ({})", cfg.name, attempt,
                   cfg.max_retries, delay, last_error);
      if (sleep) {
        sleep(std::chrono::milliseconds(static_cast<int64_t>(delay * 1000.0)));
      }
      result.retries = attempt;
    }
    HttpResponse response;
    try {
      response = transport.Post(request);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (response.status >= 200 && response.status < 300) {
      result.response = std::move(response);
      return result;
    }
    if (response.status == 401 || response.status == 403) {
      throw AuthError(cfg.name + ": HTTP " + std::to_string(response.status) +
                      " from " + request.path);
    }
    last_error = "HTTP " + std::to_string(response.status);
    if (response.status != 429 && response.status < 500) {
      throw TransportError(cfg.name + ": " + last_error + " from " +
                           request.path + ": " + response.body.substr(0, 200));
    }
  }
  throw TransportError(cfg.name + ": giving up after " +
                       std::to_string(cfg.max_retries) + " retries: " +
                       last_error);
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    ForEachJsonLine(path_, [&](size_t line, const ojson& r) {
      auto digest = r.find("digest");
      auto response = r.find("response");
      if (digest == r.end() || !digest->is_string() || response == r.end()) {
        throw DataError(path_.string() + ":" + std::to_string(line) +
                        ": malformed cache record");
      }
      entries_[digest->get<std::string>()] = *response;
    });
  }
  appender_ = std::make_unique<JsonlAppender>(path_);
}

std::optional<ojson> ResponseCache::Lookup(const std::string& digest) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::Store(const std::string& digest, const ojson& request,
                          const ojson& response) {
  char ts[32];
  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  ojson line = ojson::object();
  line["digest"] = digest;
  line["request"] = request;
  line["response"] = response;
  line["ts"] = ts;
  std::lock_guard<std::mutex> lock(mu_);
  if (entries_.count(digest) != 0) return;
  entries_[digest] = response;
  appender_->Append(line);
}

size_t ResponseCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

std::string ResponseCache::Digest(const ProviderConfig& cfg,
                                  const ojson& request) {
  return Sha256Hex(cfg.kind + "\n" + cfg.base_url + "\n" + cfg.model_name +
                   "\n" + ToJsonLine(request));
}

// ---------------------------------------------------------------------------

bool ContainsRefusalMarker(const std::string& text,
                           const std::vector<std::string>& markers) {
  std::string folded = NormalizeForComparison(text);
  // Curly apostrophes are common in model output.
  std::string ascii;
  ascii.reserve(folded.size());
  for (size_t i = 0; i < folded.size(); ++i) {
    if (folded.compare(i, 3, "\xE2\x80\x99") == 0) {
      ascii.push_back('\'');
      i += 2;
    } else {
      ascii.push_back(folded[i]);
    }
  }
  for (const auto& m : markers) {
    if (!m.empty() && ascii.find(CaseFold(m)) != std::string::npos) return true;
  }
  return false;
}

ChatProvider::ChatProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

ChatOutcome ChatProvider::Complete(const std::string& prompt) {
  if (prompt.empty()) throw InvalidArgument("chat prompt must be non-empty");
  ojson request = ojson::object();
  request["op"] = "chat";
  request["temperature"] = cfg_.temperature;
  request["max_tokens"] = cfg_.max_output_tokens;
  request["prompt"] = prompt;
  std::string digest;
  RawReply reply;
  bool cached = false;
  if (cache_) {
    digest = ResponseCache::Digest(cfg_, request);
    if (auto hit = cache_->Lookup(digest)) {
      reply.text = hit->value("text", "");
      reply.refused = hit->value("refused", false);
      cached = true;
    }
  }
  ChatOutcome outcome;
  if (!cached) {
    try {
      reply = Fetch(prompt);
    } catch (const TransportError& e) {
      outcome.status = ChatOutcome::Status::kTransportFailure;
      outcome.error = e.what();
      return outcome;
    }
    if (cache_) {
      ojson response = ojson::object();
      response["text"] = reply.text;
      response["refused"] = reply.refused;
      cache_->Store(digest, request, response);
    }
  }
  outcome.text = std::move(reply.text);
  outcome.retries = reply.retries;
  if (reply.refused || ContainsRefusalMarker(outcome.text, cfg_.refusal_markers)) {
    outcome.status = ChatOutcome::Status::kRefusal;
  }
  return outcome;
}

FunctionChat::FunctionChat(ProviderConfig cfg,
                           std::function<std::string(const std::string&)> fn)
    : ChatProvider(std::move(cfg)), fn_(std::move(fn)) {}

RawReply FunctionChat::Fetch(const std::string& prompt) {
  return RawReply{fn_(prompt), 0, false};
}

ScriptedChat::ScriptedChat(ProviderConfig cfg,
                           std::map<std::string, std::string> by_digest)
    : ChatProvider(std::move(cfg)), by_digest_(std::move(by_digest)) {}

std::map<std::string, std::string> ScriptedChat::LoadScript(
    const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  ForEachJsonLine(path, [&](size_t line, const ojson& r) {
    std::string where = path.string() + ":" + std::to_string(line);
    if (!r.contains("response") || !r["response"].is_string()) {
      throw DataError(where + ": script line needs a string \"response\"");
    }
    std::string digest;
    if (r.contains("digest")) {
      digest = r["digest"].get<std::string>();
    } else if (r.contains("prompt")) {
      digest = Sha256Hex(r["prompt"].get<std::string>());
    } else {
      throw DataError(where + ": script line needs \"prompt\" or \"digest\"");
    }
    out[digest] = r["response"].get<std::string>();
  });
  return out;
}

RawReply ScriptedChat::Fetch(const std::string& prompt) {
  std::string digest = Sha256Hex(prompt);
  auto it = by_digest_.find(digest);
  if (it != by_digest_.end()) return RawReply{it->second, 0, false};
  const auto& fallback = config().options.find("fallback");
  if (fallback != config().options.end() && fallback->is_string()) {
    return RawReply{fallback->get<std::string>(), 0, false};
  }
  throw TransportError(config().name + ": no scripted response for prompt " +
                       digest.substr(0, 16));
}

// ---------------------------------------------------------------------------

Embedder::Embedder(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

std::vector<EmbeddingVector> Embedder::Embed(
    const std::vector<std::string>& texts) {
  if (texts.empty()) throw InvalidArgument("embedding batch must be non-empty");
  ojson request = ojson::object();
  request["op"] = "embed";
  request["input"] = texts;
  std::string digest;
  std::vector<EmbeddingVector> out;
  bool cached = false;
  if (cache_) {
    digest = ResponseCache::Digest(cfg_, request);
    if (auto hit = cache_->Lookup(digest)) {
      for (const auto& v : *hit) out.push_back({v.get<std::vector<double>>()});
      cached = true;
    }
  }
  if (!cached) out = Fetch(texts);
  if (out.size() != texts.size()) {
    throw ProtocolError(cfg_.name + ": expected " + std::to_string(texts.size()) +
                        " embeddings, got " + std::to_string(out.size()));
  }
  size_t dim = out.front().dimension();
  for (const auto& v : out) {
    if (v.dimension() != dim) {
      throw ProtocolError(cfg_.name + ": embedding dimension mismatch (" +
                          std::to_string(dim) + " vs " +
                          std::to_string(v.dimension()) + ")");
    }
    for (double x : v.values) {
      if (!std::isfinite(x)) throw ProtocolError(cfg_.name + ": non-finite embedding");
    }
  }
  if (dim == 0) throw ProtocolError(cfg_.name + ": zero-dimensional embedding");
  if (cache_ && !cached) {
    ojson response = ojson::array();
    for (const auto& v : out) response.push_back(v.values);
    cache_->Store(digest, request, response);
  }
  return out;
}

FunctionEmbedder::FunctionEmbedder(
    ProviderConfig cfg, std::function<EmbeddingVector(const std::string&)> fn)
    : Embedder(std::move(cfg)), fn_(std::move(fn)) {}

std::vector<EmbeddingVector> FunctionEmbedder::Fetch(
    const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(fn_(t));
  return out;
}

EmbeddingVector LetterFrequency(const std::string& text) {
  EmbeddingVector v;
  v.values.assign(26, 0.0);
  for (char c : text) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c >= 'a' && c <= 'z') v.values[c - 'a'] += 1.0;
  }
  return v;
}

// ---------------------------------------------------------------------------

TokenScorer::TokenScorer(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

TokenLogprobs TokenScorer::Score(const std::string& text) {
  if (Trim(text).empty()) throw InvalidArgument("cannot score empty text");
  ojson request = ojson::object();
  request["op"] = "logprobs";
  request["text"] = text;
  std::string digest;
  TokenLogprobs out;
  bool cached = false;
  if (cache_) {
    digest = ResponseCache::Digest(cfg_, request);
    if (auto hit = cache_->Lookup(digest)) {
      out.tokens = (*hit)["tokens"].get<std::vector<std::string>>();
      out.logprobs = (*hit)["logprobs"].get<std::vector<double>>();
      cached = true;
    }
  }
  if (!cached) out = Fetch(text);
  if (out.tokens.size() != out.logprobs.size()) {
    throw ProtocolError(cfg_.name + ": token/logprob length mismatch");
  }
  if (out.tokens.empty()) {
    throw ProtocolError(cfg_.name + ": no scored tokens for non-empty text");
  }
  for (double& lp : out.logprobs) {
    // Providers occasionally return tiny positive values from float rounding.
    if (lp > 0.0 && lp < 1e-6) lp = 0.0;
    if (!std::isfinite(lp) || lp > 0.0) {
      throw ProtocolError(cfg_.name + ": invalid logprob " + std::to_string(lp));
    }
  }
  if (cache_ && !cached) {
    ojson response = ojson::object();
    response["tokens"] = out.tokens;
    response["logprobs"] = out.logprobs;
    cache_->Store(digest, request, response);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string ArgmaxLabel(const Task& task,
                        const std::map<std::string, double>& scores) {
  const std::string* best = nullptr;
  double best_score = -INFINITY;
  for (const auto& label : task.labels()) {
    auto it = scores.find(label);
    double s = it == scores.end() ? -INFINITY : it->second;
    if (best == nullptr || s > best_score) {
      best = &label;
      best_score = s;
    }
  }
  return *best;
}

Classifier::Classifier(ProviderConfig cfg, Task task)
    : cfg_(std::move(cfg)), task_(std::move(task)) {}

ClassifierPrediction Classifier::Classify(const ClassifierInput& input) {
  ojson request = ojson::object();
  request["op"] = "classify";
  if (task_.is_pair()) {
    if (input.premise.empty() || input.hypothesis.empty()) {
      throw InvalidArgument("pair classification needs premise and hypothesis");
    }
    request["premise"] = input.premise;
    request["hypothesis"] = input.hypothesis;
  } else {
    if (input.text.empty()) throw InvalidArgument("classification needs text");
    request["text"] = input.text;
  }
  std::string digest;
  ClassifierPrediction raw;
  bool cached = false;
  if (cache_) {
    digest = ResponseCache::Digest(cfg_, request);
    if (auto hit = cache_->Lookup(digest)) {
      raw.label = (*hit)["label"].get<std::string>();
      raw.scores = (*hit)["scores"].get<std::map<std::string, double>>();
      cached = true;
    }
  }
  if (!cached) raw = Fetch(input);

  auto label = task_.MatchLabel(raw.label);
  if (!label) {
    throw ProtocolError(cfg_.name + ": classifier returned label \"" +
                        raw.label + "\" outside the label set");
  }
  ClassifierPrediction out;
  out.label = *label;
  for (const auto& [name, score] : raw.scores) {
    auto canonical = task_.MatchLabel(name);
    if (!canonical) {
      throw ProtocolError(cfg_.name + ": score for unknown label \"" + name + "\"");
    }
    if (!std::isfinite(score)) {
      throw ProtocolError(cfg_.name + ": non-finite score for \"" + name + "\"");
    }
    out.scores[*canonical] = score;
  }
  if (!out.scores.empty() && ArgmaxLabel(task_, out.scores) != out.label) {
    throw ProtocolError(cfg_.name + ": label \"" + out.label +
                        "\" is not the argmax of the returned scores");
  }
  if (cache_ && !cached) {
    ojson response = ojson::object();
    response["label"] = raw.label;
    response["scores"] = raw.scores;
    cache_->Store(digest, request, response);
  }
  return out;
}

LexiconClassifier::LexiconClassifier(ProviderConfig cfg, Task task,
                                     std::map<std::string, double> weights,
                                     std::string positive_label,
                                     std::string negative_label)
    : Classifier(std::move(cfg), std::move(task)),
      positive_(std::move(positive_label)),
      negative_(std::move(negative_label)) {
  for (const auto& [word, w] : weights) weights_[CaseFold(word)] = w;
  if (!this->task().HasLabel(positive_) || !this->task().HasLabel(negative_)) {
    throw ConfigError(config().name + ": lexicon labels \"" + positive_ +
                      "\"/\"" + negative_ + "\" not in task label set");
  }
}

ClassifierPrediction LexiconClassifier::Fetch(const ClassifierInput& input) {
  std::string text = task().is_pair()
                         ? input.premise + " " + input.hypothesis
                         : input.text;
  double net = 0.0;
  for (const auto& token : SplitWhitespace(text)) {
    auto it = weights_.find(CaseFold(StripPunctuation(token)));
    if (it != weights_.end()) net += it->second;
  }
  ClassifierPrediction p;
  for (const auto& l : task().labels()) p.scores[l] = 0.0;
  p.scores[positive_] = net;
  p.scores[negative_] = -net;
  p.label = ArgmaxLabel(task(), p.scores);
  return p;
}

}  // namespace cfx
