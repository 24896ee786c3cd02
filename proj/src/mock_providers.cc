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

// Deterministic offline providers used for tests and dry runs. The chat mocks
// read the default prompt layouts (see templates/); their line markers can be
// overridden through `options` when a custom template changes them.

#include <cctype>
#include <cmath>
#include <set>

#include "cfx/config.h"
#include "cfx/error.h"
#include "cfx/text.h"
#include "provider_impl.h"

namespace cfx {
namespace {

// Last line of `prompt` starting with `marker`, with the marker removed.
std::optional<std::string> LastLineAfter(const std::string& prompt,
                                         const std::string& marker) {
  std::optional<std::string> found;
  for (const auto& line : Split(prompt, '\n')) {
    if (StartsWith(line, marker)) found = std::string(Trim(line.substr(marker.size())));
  }
  return found;
}

// Last line containing `marker`, returning what follows it.
std::optional<std::string> LastLineContaining(const std::string& prompt,
                                              const std::string& marker) {
  std::optional<std::string> found;
  for (const auto& line : Split(prompt, '\n')) {
    size_t pos = line.find(marker);
    if (pos != std::string::npos) {
      found = std::string(Trim(std::string_view(line).substr(pos + marker.size())));
    }
  }
  return found;
}

// Uniform value in [0, 1) from a hash.
double UnitHash(std::string_view key) {
  return static_cast<double>(Fnv1a64(key) >> 11) * 0x1.0p-53;
}

std::string NormalToken(std::string_view token) {
  return CaseFold(StripPunctuation(token));
}

std::set<std::string> TokenSet(const std::string& text) {
  std::set<std::string> out;
  for (const auto& t : SplitWhitespace(text)) {
    std::string n = NormalToken(t);
    if (!n.empty()) out.insert(n);
  }
  return out;
}

bool HasNegation(const std::set<std::string>& tokens) {
  static const std::set<std::string> kNegations = {
      "not", "no", "never", "nobody", "nothing", "none", "nowhere"};
  for (const auto& t : tokens) {
    if (kNegations.count(t) != 0) return true;
    if (t.size() > 3 && t.compare(t.size() - 3, 3, "n't") == 0) return true;
  }
  return false;
}

// Crude inference rule: negation mismatch -> contradiction; hypothesis
// covered by the premise -> entailment; otherwise neutral.
std::string OverlapNliLabel(const std::string& premise,
                            const std::string& hypothesis) {
  auto p = TokenSet(premise);
  auto h = TokenSet(hypothesis);
  if (HasNegation(p) != HasNegation(h)) return "contradiction";
  for (const auto& t : h) {
    if (p.count(t) == 0) return "neutral";
  }
  return "entailment";
}

std::map<std::string, std::string> DefaultAntonyms() {
  std::map<std::string, std::string> pairs = {
      {"good", "bad"},          {"great", "awful"},
      {"love", "hate"},         {"loved", "hated"},
      {"best", "worst"},        {"happy", "sad"},
      {"wonderful", "horrible"}, {"excellent", "poor"},
      {"like", "dislike"},      {"brilliant", "dull"},
      {"fun", "boring"},        {"beautiful", "ugly"},
      {"enjoyed", "endured"},   {"masterpiece", "disaster"},
      {"sitting", "standing"},  {"inside", "outside"},
      {"man", "woman"},         {"day", "night"},
      {"young", "old"},         {"kind", "cruel"},
      {"respect", "despise"},   {"friends", "enemies"},
  };
  std::map<std::string, std::string> both;
  for (const auto& [a, b] : pairs) {
    both[a] = b;
    both[b] = a;
  }
  return both;
}

std::string QuoteList(const std::vector<std::string>& words) {
  std::vector<std::string> quoted;
  for (const auto& w : words) quoted.push_back("\"" + w + "\"");
  return Join(quoted, ", ");
}

// Swaps words from an antonym table; if nothing matched, negates by putting
// "not" in front. Emits the three-step answer template.
class RewriteChat : public ChatProvider {
 public:
  explicit RewriteChat(const ProviderConfig& cfg) : ChatProvider(cfg) {
    const auto& o = config().options;
    antonyms_ = DefaultAntonyms();
    if (const auto* extra = Find(o, "antonyms")) {
      for (const auto& [k, v] : extra->items()) {
        antonyms_[CaseFold(k)] = v.get<std::string>();
        antonyms_[CaseFold(v.get<std::string>())] = k;
      }
    }
    seed_ = std::to_string(GetInt(o, "seed", 0));
    violation_rate_ = GetNumber(o, "violation_rate", 0.0);
    refusal_rate_ = GetNumber(o, "refusal_rate", 0.0);
    copy_paste_rate_ = GetNumber(o, "copy_paste_rate", 0.0);
    copy_target_ = GetString(o, "copy_target", "entailment");
    target_marker_ = GetString(o, "target_marker", "Target label:");
    single_marker_ = GetString(o, "single_marker", "Text:");
    editable_marker_ = GetString(o, "editable_marker", "(edit this):");
    fixed_marker_ = GetString(o, "fixed_marker", "(keep unchanged):");
    cf_prefix_ = GetString(o, "cf_prefix", "Counterfactual:");
  }

 protected:
  RawReply Fetch(const std::string& prompt) override {
    double u = UnitHash(seed_ + "\n" + prompt);
    if (u < refusal_rate_) {
      return {"I'm sorry, but I cannot help with rewriting this text.", 0, false};
    }
    auto target = LastLineAfter(prompt, target_marker_);
    auto editable = LastLineContaining(prompt, editable_marker_);
    std::optional<std::string> original =
        editable ? editable : LastLineAfter(prompt, single_marker_);
    if (!target || !original) {
      return {"I could not find the text to rewrite.", 0, false};
    }
    std::string cf;
    std::string step1;
    std::string step2;
    auto fixed = LastLineContaining(prompt, fixed_marker_);
    if (editable && fixed && CaseFold(*target) == CaseFold(copy_target_) &&
        UnitHash("copy\n" + seed_ + "\n" + prompt) < copy_paste_rate_) {
      cf = *fixed;
      step1 = "(all)";
      step2 = "copy the other sentence";
    } else {
      std::vector<std::string> tokens = SplitWhitespace(*original);
      std::vector<std::string> from;
      std::vector<std::string> to;
      for (auto& tok : tokens) {
        auto it = antonyms_.find(NormalToken(tok));
        if (it == antonyms_.end()) continue;
        from.push_back(tok);
        to.push_back(it->second);
        tok = it->second;
      }
      if (from.empty()) {
        tokens.insert(tokens.begin(), "not");
        step1 = "(none)";
        step2 = "add \"not\"";
      } else {
        step1 = QuoteList(from);
        std::vector<std::string> swaps;
        for (size_t i = 0; i < from.size(); ++i) {
          swaps.push_back("\"" + from[i] + "\" -> \"" + to[i] + "\"");
        }
        step2 = Join(swaps, ", ");
      }
      cf = Join(tokens, " ");
    }
    if (u < refusal_rate_ + violation_rate_) {
      return {"Sure! Here is the rewritten text: " + cf, 0, false};
    }
    return {"Step 1: " + step1 + "\nStep 2: " + step2 + "\n" + cf_prefix_ + " " + cf,
            0, false};
  }

 private:
  std::map<std::string, std::string> antonyms_;
  std::string seed_;
  double violation_rate_ = 0;
  double refusal_rate_ = 0;
  double copy_paste_rate_ = 0;
  std::string copy_target_;
  std::string target_marker_;
  std::string single_marker_;
  std::string editable_marker_;
  std::string fixed_marker_;
  std::string cf_prefix_;
};

// Keyword-counting judge. Scoring prompts (those with a label line) get
// "FL/UA/RS" lines; classification prompts get a bare label.
class JudgeChat : public ChatProvider {
 public:
  explicit JudgeChat(const ProviderConfig& cfg) : ChatProvider(cfg) {
    const auto& o = config().options;
    rule_ = GetString(o, "rule", "keywords");
    if (rule_ != "keywords" && rule_ != "overlap") {
      throw ConfigError(config().name + ": mock-judge rule must be keywords or overlap");
    }
    if (const auto* kw = Find(o, "keywords")) {
      for (const auto& [label, words] : kw->items()) {
        labels_.push_back(label);
        for (const auto& w : words) keywords_[label].insert(CaseFold(w.get<std::string>()));
      }
    }
    if (rule_ == "keywords" && labels_.empty()) {
      throw ConfigError(config().name + ": mock-judge needs options.keywords");
    }
    original_marker_ = GetString(o, "original_marker", "Original:");
    cf_marker_ = GetString(o, "cf_marker", "Counterfactual:");
    label_marker_ = GetString(o, "label_marker", "Label:");
  }

 protected:
  RawReply Fetch(const std::string& prompt) override {
    auto cf = LastLineAfter(prompt, cf_marker_);
    if (!cf) return {"I need a counterfactual to evaluate.", 0, false};
    std::string predicted = Predict(*cf);
    auto shown = LastLineAfter(prompt, label_marker_);
    if (!shown) {
      std::string answer = predicted;
      if (!answer.empty()) answer[0] = static_cast<char>(std::toupper(answer[0]));
      return {answer + ".", 0, false};
    }
    int fl = CaseFold(*shown) == CaseFold(predicted) ? 4 : 1;
    auto original = LastLineAfter(prompt, original_marker_).value_or("");
    auto orig_tokens = TokenSet(original);
    auto cf_words = SplitWhitespace(*cf);
    size_t novel = 0;
    for (const auto& w : cf_words) {
      if (orig_tokens.count(NormalToken(w)) == 0) ++novel;
    }
    double novel_frac = cf_words.empty() ? 1.0 : static_cast<double>(novel) /
                                                     static_cast<double>(cf_words.size());
    int ua = novel_frac < 0.15 ? 4 : novel_frac < 0.35 ? 3 : novel_frac < 0.6 ? 2 : 1;
    double ratio = static_cast<double>(cf_words.size() + 1) /
                   static_cast<double>(SplitWhitespace(original).size() + 1);
    int rs = (ratio >= 0.5 && ratio <= 2.0) ? 4 : 2;
    return {"FL: " + std::to_string(fl) + "\nUA: " + std::to_string(ua) +
                "\nRS: " + std::to_string(rs),
            0, false};
  }

 private:
  std::string Predict(const std::string& cf) const {
    if (rule_ == "overlap") {
      // Pair rendering: "Premise: ... Hypothesis: ..."
      size_t p = cf.find("Premise:");
      size_t h = cf.find("Hypothesis:");
      if (p == std::string::npos || h == std::string::npos || h < p) return "neutral";
      std::string premise = cf.substr(p + 8, h - p - 8);
      std::string hypothesis = cf.substr(h + 11);
      return OverlapNliLabel(premise, hypothesis);
    }
    auto tokens = SplitWhitespace(cf);
    std::string best = labels_.front();
    size_t best_count = 0;
    for (const auto& label : labels_) {
      size_t count = 0;
      for (const auto& t : tokens) count += keywords_.at(label).count(NormalToken(t));
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    return best;
  }

  std::string rule_;
  std::vector<std::string> labels_;
  std::map<std::string, std::set<std::string>> keywords_;
  std::string original_marker_;
  std::string cf_marker_;
  std::string label_marker_;
};

class UniformScorer : public TokenScorer {
 public:
  explicit UniformScorer(const ProviderConfig& cfg) : TokenScorer(cfg) {
    int64_t v = GetInt(config().options, "vocab_size", 50257);
    if (v < 1) throw ConfigError(config().name + ": vocab_size must be >= 1");
    logprob_ = -std::log(static_cast<double>(v));
  }

 protected:
  TokenLogprobs Fetch(const std::string& text) override {
    TokenLogprobs out;
    out.tokens = SplitWhitespace(text);
    out.logprobs.assign(out.tokens.size(), logprob_);
    return out;
  }

 private:
  double logprob_;
};

class ConstantScorer : public TokenScorer {
 public:
  explicit ConstantScorer(const ProviderConfig& cfg) : TokenScorer(cfg) {
    logprob_ = GetNumber(config().options, "logprob", 0.0);
    if (!(logprob_ <= 0.0)) throw ConfigError(config().name + ": logprob must be <= 0");
  }

 protected:
  TokenLogprobs Fetch(const std::string& text) override {
    TokenLogprobs out;
    out.tokens = SplitWhitespace(text);
    out.logprobs.assign(out.tokens.size(), logprob_);
    return out;
  }

 private:
  double logprob_;
};

// Pseudo-random but stable per-token logprobs in [-4.5, -0.5].
class HashScorer : public TokenScorer {
 public:
  explicit HashScorer(const ProviderConfig& cfg) : TokenScorer(cfg) {}

 protected:
  TokenLogprobs Fetch(const std::string& text) override {
    TokenLogprobs out;
    out.tokens = SplitWhitespace(text);
    for (const auto& t : out.tokens) {
      out.logprobs.push_back(-(0.5 + static_cast<double>(Fnv1a64(CaseFold(t)) % 1000) / 250.0));
    }
    return out;
  }
};

class OverlapClassifier : public Classifier {
 public:
  OverlapClassifier(const ProviderConfig& cfg, const Task& task) : Classifier(cfg, task) {
    for (const char* l : {"entailment", "neutral", "contradiction"}) {
      if (!task.HasLabel(l)) {
        throw ConfigError(config().name + ": mock-overlap needs label \"" +
                          std::string(l) + "\"");
      }
    }
    if (!task.is_pair()) throw ConfigError(config().name + ": mock-overlap needs a pair task");
  }

 protected:
  ClassifierPrediction Fetch(const ClassifierInput& input) override {
    ClassifierPrediction p;
    p.label = OverlapNliLabel(input.premise, input.hypothesis);
    return p;
  }
};

}  // namespace

namespace internal {

std::unique_ptr<ChatProvider> NewRewriteChat(const ProviderConfig& cfg) {
  return std::make_unique<RewriteChat>(cfg);
}
std::unique_ptr<ChatProvider> NewJudgeChat(const ProviderConfig& cfg) {
  return std::make_unique<JudgeChat>(cfg);
}
std::unique_ptr<TokenScorer> NewUniformScorer(const ProviderConfig& cfg) {
  return std::make_unique<UniformScorer>(cfg);
}
std::unique_ptr<TokenScorer> NewConstantScorer(const ProviderConfig& cfg) {
  return std::make_unique<ConstantScorer>(cfg);
}
std::unique_ptr<TokenScorer> NewHashScorer(const ProviderConfig& cfg) {
  return std::make_unique<HashScorer>(cfg);
}
std::unique_ptr<Classifier> NewOverlapClassifier(const ProviderConfig& cfg,
                                                 const Task& task) {
  return std::make_unique<OverlapClassifier>(cfg, task);
}

}  // namespace internal

namespace {

std::unique_ptr<HttpTransport> TransportFor(const ProviderConfig& cfg,
                                            const ProviderHooks& hooks) {
  if (hooks.transport) return hooks.transport(cfg);
  return MakeHttplibTransport(cfg.base_url, cfg.timeout_seconds);
}

Sleeper SleeperFor(const ProviderHooks& hooks) {
  return hooks.sleep ? hooks.sleep : RealSleeper();
}

[[noreturn]] void Unsupported(const ProviderConfig& cfg, const char* capability) {
  throw ConfigError("provider '" + cfg.name + "' (kind " + cfg.kind +
                    ") does not support " + capability);
}

}  // namespace

std::unique_ptr<ChatProvider> MakeChatProvider(const ProviderConfig& cfg,
                                               const ProviderHooks& hooks) {
  cfg.Validate();
  if (cfg.kind == "openai") {
    return internal::NewOpenAiChat(cfg, TransportFor(cfg, hooks), SleeperFor(hooks));
  }
  if (cfg.kind == "mock-scripted") {
    std::map<std::string, std::string> script;
    std::string path = GetString(cfg.options, "script");
    if (!path.empty()) script = ScriptedChat::LoadScript(path);
    return std::make_unique<ScriptedChat>(cfg, std::move(script));
  }
  if (cfg.kind == "mock-rewrite") return internal::NewRewriteChat(cfg);
  if (cfg.kind == "mock-judge") return internal::NewJudgeChat(cfg);
  Unsupported(cfg, "chat completion");
}

std::unique_ptr<Embedder> MakeEmbedder(const ProviderConfig& cfg,
                                       const ProviderHooks& hooks) {
  cfg.Validate();
  if (cfg.kind == "openai") {
    return internal::NewOpenAiEmbedder(cfg, TransportFor(cfg, hooks), SleeperFor(hooks));
  }
  if (cfg.kind == "mock-letters") {
    return std::make_unique<FunctionEmbedder>(cfg, LetterFrequency);
  }
  Unsupported(cfg, "embeddings");
}

std::unique_ptr<TokenScorer> MakeTokenScorer(const ProviderConfig& cfg,
                                             const ProviderHooks& hooks) {
  cfg.Validate();
  if (cfg.kind == "openai") {
    if (!GetBool(cfg.options, "logprobs", true)) Unsupported(cfg, "token logprobs");
    return internal::NewOpenAiScorer(cfg, TransportFor(cfg, hooks), SleeperFor(hooks));
  }
  if (cfg.kind == "mock-uniform") return internal::NewUniformScorer(cfg);
  if (cfg.kind == "mock-constant") return internal::NewConstantScorer(cfg);
  if (cfg.kind == "mock-hash") return internal::NewHashScorer(cfg);
  Unsupported(cfg, "token logprobs");
}

std::unique_ptr<Classifier> MakeClassifier(const ProviderConfig& cfg,
                                           const Task& task,
                                           const ProviderHooks& hooks) {
  cfg.Validate();
  if (cfg.kind == "http") {
    return internal::NewHttpClassifier(cfg, task, TransportFor(cfg, hooks),
                                       SleeperFor(hooks));
  }
  if (cfg.kind == "mock-lexicon") {
    std::map<std::string, double> weights;
    if (const auto* w = Find(cfg.options, "weights")) {
      for (const auto& [word, value] : w->items()) weights[word] = value.get<double>();
    }
    std::string pos = task.HasLabel("positive") ? "positive" : task.labels()[1];
    std::string neg = task.HasLabel("negative") ? "negative" : task.labels()[0];
    return std::make_unique<LexiconClassifier>(
        cfg, task, std::move(weights), GetString(cfg.options, "positive_label", pos),
        GetString(cfg.options, "negative_label", neg));
  }
  if (cfg.kind == "mock-overlap") return internal::NewOverlapClassifier(cfg, task);
  Unsupported(cfg, "classification");
}

}  // namespace cfx
