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

#include "cfx/cli.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cfx/analysis.h"
#include "cfx/config.h"
#include "cfx/corpus.h"
#include "cfx/error.h"
#include "cfx/genpipe.h"
#include "cfx/jsonl.h"
#include "cfx/judge.h"
#include "cfx/metrics.h"
#include "cfx/providers.h"
#include "cfx/records.h"
#include "cfx/retrieval.h"
#include "cfx/text.h"
#include "spdlog/sinks/stdout_color_sinks.h"
#include "spdlog/spdlog.h"

namespace cfx {

namespace {

namespace fs = std::filesystem;

// Configuration

struct DatasetSpec {
  std::string name;
  std::optional<Task> task;
  std::map<SplitName, fs::path> splits;
  fs::path reference_cfs;
  SplitName reference_split = SplitName::kValidation;
  std::string classifier;

  fs::path SplitPath(SplitName split) const {
    auto it = splits.find(split);
    if (it == splits.end()) {
      throw ConfigError("dataset " + name + " has no " +
                        std::string(SplitNameString(split)) + " split");
    }
    return it->second;
  }
};

struct RunConfig {
  fs::path base;
  std::string digest;
  nlohmann::json root;
  std::optional<uint64_t> seed;
  std::map<std::string, DatasetSpec> datasets;
  std::string embedder;
  std::string scorer;
  fs::path generate_template;
  fs::path judge_template;

  const DatasetSpec& Dataset(const std::string& name) const {
    auto it = datasets.find(name);
    if (it == datasets.end()) throw ConfigError("unknown dataset '" + name + "'");
    return it->second;
  }

  const nlohmann::json& ProviderTable(const std::string& name) const {
    auto p = root.find("provider");
    if (p == root.end() || !p->is_object() || !p->contains(name)) {
      throw ConfigError("unknown provider '" + name + "'");
    }
    return (*p)[name];
  }

  ProviderConfig Provider(const std::string& name, uint64_t run_seed) const {
    if (name.empty()) throw ConfigError("no provider configured for this role");
    nlohmann::json table = ProviderTable(name);
    std::string kind = GetString(table, "kind");
    if (StartsWith(kind, "mock-")) {
      nlohmann::json& opts = table["options"];
      if (opts.is_null()) opts = nlohmann::json::object();
      if (!opts.contains("seed")) opts["seed"] = run_seed;
      if (opts.contains("script") && opts["script"].is_string()) {
        opts["script"] = Resolve(opts["script"].get<std::string>()).string();
      }
    }
    return ProviderConfig::FromConfig(name, table);
  }

  fs::path Resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
  }
};

Task LoadTaskSpec(const std::string& spec, const fs::path& base) {
  fs::path candidate = base / spec;
  if (!fs::path(spec).is_absolute() && fs::exists(candidate)) {
    return Task::Load(candidate.string());
  }
  return Task::Load(spec);
}

RunConfig LoadRunConfig(const std::string& path) {
  if (path.empty()) throw ConfigError("--config is required for this subcommand");
  RunConfig rc;
  fs::path p(path);
  std::string text = ReadTextFile(p);
  rc.root = ParseConfig(text, p.string());
  rc.digest = Sha256Hex(text);
  rc.base = p.parent_path();
  if (rc.root.contains("seed")) {
    int64_t s = GetInt(rc.root, "seed", 0);
    if (s < 0) throw ConfigError(p.string() + ": seed must be non-negative");
    rc.seed = static_cast<uint64_t>(s);
  }
  rc.embedder = GetString(rc.root, "roles.embedder");
  rc.scorer = GetString(rc.root, "roles.scorer");
  std::string gen_t = GetString(rc.root, "templates.generate");
  if (!gen_t.empty()) rc.generate_template = rc.Resolve(gen_t);
  std::string judge_t = GetString(rc.root, "templates.judge");
  if (!judge_t.empty()) rc.judge_template = rc.Resolve(judge_t);
  if (auto d = rc.root.find("dataset"); d != rc.root.end()) {
    if (!d->is_object()) throw ConfigError(p.string() + ": [dataset] must be a table");
    for (const auto& [name, table] : d->items()) {
      DatasetSpec spec;
      spec.name = name;
      std::string task = GetString(table, "task", name);
      spec.task = LoadTaskSpec(task, rc.base);
      for (SplitName s : {SplitName::kTrain, SplitName::kValidation, SplitName::kTest}) {
        std::string split_path = GetString(table, std::string(SplitNameString(s)));
        if (!split_path.empty()) spec.splits[s] = rc.Resolve(split_path);
      }
      std::string ref = GetString(table, "reference_cfs");
      if (!ref.empty()) spec.reference_cfs = rc.Resolve(ref);
      std::string ref_split = GetString(table, "reference_split", "validation");
      auto parsed = ParseSplitName(ref_split);
      if (!parsed) throw ConfigError("dataset " + name + ": bad reference_split");
      spec.reference_split = *parsed;
      spec.classifier = GetString(table, "classifier");
      rc.datasets.emplace(name, std::move(spec));
    }
  }
  return rc;
}

// Run directory

class RunDir {
 public:
  explicit RunDir(const std::string& root) : root_(root) {
    if (root.empty()) throw ConfigError("--out is required for this subcommand");
    fs::create_directories(root_);
    lock_ = root_ / ".lock";
    int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) {
        throw Error("lock", "run directory " + root_.string() +
                                " is in use (remove " + lock_.string() + " if stale)");
      }
      throw Error("io", "cannot create " + lock_.string() + ": " + std::strerror(errno));
    }
    std::string pid = std::to_string(::getpid()) + "\n";
    (void)!::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~RunDir() {
    std::error_code ec;
    fs::remove(lock_, ec);
  }
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

  fs::path Sub(const std::string& name) const {
    fs::path p = root_ / name;
    fs::create_directories(p);
    return p;
  }
  const fs::path& root() const { return root_; }

  void WriteManifest(const std::string& config_digest, std::optional<uint64_t> seed) const {
    fs::path path = root_ / "manifest.json";
    ojson m;
    if (fs::exists(path)) {
      try {
        m = ojson::parse(ReadTextFile(path));
      } catch (const nlohmann::json::exception&) {
        throw DataError(path.string() + ": corrupt manifest");
      }
    }
    m["tool"] = "cfx";
    m["version"] = CFX_VERSION;
    if (!config_digest.empty()) m["config_digest"] = config_digest;
    if (seed) m["seed"] = *seed;
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& entry : fs::recursive_directory_iterator(root_)) {
      if (!entry.is_regular_file()) continue;
      std::string rel = fs::relative(entry.path(), root_).generic_string();
      if (rel == "manifest.json" || rel == ".lock" || StartsWith(rel, "cache/")) continue;
      files.emplace_back(rel, Sha256Hex(ReadTextFile(entry.path())));
    }
    std::sort(files.begin(), files.end());
    ojson artifacts = ojson::object();
    for (const auto& [rel, digest] : files) artifacts[rel] = digest;
    m["artifacts"] = artifacts;
    WriteTextFile(path, m.dump(2) + "\n");
  }

 private:
  fs::path root_;
  fs::path lock_;
};

void WriteJsonFile(const fs::path& path, const ojson& j) {
  WriteTextFile(path, j.dump(2) + "\n");
}

ojson ReadJsonFile(const fs::path& path) {
  try {
    return ojson::parse(ReadTextFile(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

ojson OptJson(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<double> OptNumber(const ojson& j, const char* key, const fs::path& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw DataError(where.string() + ": \"" + key + "\" is not a number");
  return it->get<double>();
}

size_t Count(const ojson& j, const char* key, const fs::path& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_unsigned()) {
    if (it != j.end() && it->is_number_integer() && it->get<int64_t>() >= 0) {
      return static_cast<size_t>(it->get<int64_t>());
    }
    throw DataError(where.string() + ": missing count \"" + key + "\"");
  }
  return it->get<size_t>();
}

std::string Text(const ojson& j, const char* key, const fs::path& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw DataError(where.string() + ": missing string \"" + key + "\"");
  }
  return it->get<std::string>();
}

std::vector<fs::path> ListFiles(const fs::path& dir, const std::string& suffix) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string StripSuffix(const std::string& name, const std::string& suffix) {
  if (name.size() >= suffix.size() &&
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return name.substr(0, name.size() - suffix.size());
  }
  return name;
}

SplitName ParseSplitArg(const std::string& s) {
  auto split = ParseSplitName(s);
  if (!split) throw InvalidArgument("unknown split \"" + s + "\"");
  return *split;
}

std::string ModelOf(const ChatProvider& chat) {
  return chat.config().model_name.empty() ? chat.config().name : chat.config().model_name;
}

// Real endpoints get an on-disk response cache so interrupted runs resume
// without repeating calls. Mocks are deterministic and skip it.
template <typename Provider>
void AttachCache(Provider& p, const RunDir& run) {
  if (p.config().is_mock()) return;
  p.set_cache(std::make_shared<ResponseCache>(run.Sub("cache") /
                                              (p.config().name + ".jsonl")));
}

std::vector<CounterfactualRecord> LoadCfsChecked(const fs::path& path, const Task& task,
                                                 const DatasetSplit& split) {
  auto cfs = LoadCfRecords(path);
  auto violations = ValidatePairing(task, split, cfs);
  if (!violations.empty()) {
    throw DataError(path.string() + ": " + std::to_string(violations.size()) +
                    " pairing violation(s); first: " + violations.front().cf_id + ": " +
                    violations.front().message);
  }
  return cfs;
}

// Subcommands

struct Common {
  std::string config;
  std::string out;
  uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  std::optional<uint64_t> KnownSeed(const RunConfig* rc) const {
    if (seed_opt != nullptr && seed_opt->count() > 0) return seed;
    if (rc != nullptr && rc->seed) return *rc->seed;
    return std::nullopt;
  }
  uint64_t Seed(const RunConfig* rc) const { return KnownSeed(rc).value_or(0); }
};

void AddCommon(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Run configuration file");
  sub->add_option("--out", c.out, "Run directory (augment: output file)");
  c.seed_opt = sub->add_option("--seed", c.seed, "Seed (overrides the config seed)");
}

struct GenerateArgs {
  Common common;
  std::string dataset;
  std::string split = "test";
  std::string generator;
  std::string edited_field;
  std::string target;
  size_t limit = 0;
};

int CmdGenerate(const GenerateArgs& a, std::ostream& out) {
  RunConfig rc = LoadRunConfig(a.common.config);
  uint64_t seed = a.common.Seed(&rc);
  const DatasetSpec& ds = rc.Dataset(a.dataset);
  const Task& task = *ds.task;
  SplitName split_name = ParseSplitArg(a.split);
  DatasetSplit split = LoadDataset(ds.SplitPath(split_name), task, split_name);
  if (a.limit > 0 && split.instances.size() > a.limit) split.instances.resize(a.limit);

  Field field = Field::kText;
  if (task.is_pair()) {
    if (a.edited_field.empty()) {
      throw InvalidArgument("pair dataset " + ds.name + " needs --edited-field");
    }
    auto f = ParseField(a.edited_field);
    if (!f || *f == Field::kText) {
      throw InvalidArgument("--edited-field must be premise or hypothesis");
    }
    field = *f;
  } else if (!a.edited_field.empty() && a.edited_field != "text") {
    throw InvalidArgument("single-text dataset " + ds.name + " only edits \"text\"");
  }

  RunDir run(a.common.out);
  auto embedder = MakeEmbedder(rc.Provider(rc.embedder, seed));
  AttachCache(*embedder, run);
  fs::path index_path = run.Sub("index") / (ds.name + "." + rc.embedder + ".jsonl");
  std::optional<EmbeddingIndex> index;
  if (fs::exists(index_path)) {
    index = LoadIndex(index_path, task);
  } else {
    if (ds.reference_cfs.empty()) {
      throw ConfigError("dataset " + ds.name + " has no reference_cfs");
    }
    DatasetSplit reference =
        LoadDataset(ds.SplitPath(ds.reference_split), task, ds.reference_split);
    auto human = LoadCfRecords(ds.reference_cfs);
    index = BuildIndex(task, reference, human, *embedder);
    SaveIndex(index_path, *index, task);
  }

  auto chat = MakeChatProvider(rc.Provider(a.generator, seed));
  AttachCache(*chat, run);
  PromptTemplate tmpl = rc.generate_template.empty()
                            ? PromptTemplate::Default()
                            : PromptTemplate::Load(rc.generate_template);

  std::string stem = a.generator + "." + ds.name + "." + a.split;
  if (task.is_pair()) stem += "." + std::string(FieldName(field));
  fs::path cfs_path = run.Sub("cfs") / (stem + ".jsonl");
  std::vector<CounterfactualRecord> existing;
  if (fs::exists(cfs_path)) existing = LoadCfRecords(cfs_path);

  GenerationOptions opts;
  opts.run_id = stem;
  opts.generator = a.generator;
  opts.dataset = ds.name;
  opts.edited_field = field;
  opts.seed = seed;
  if (!a.target.empty()) opts.target_override = a.target;

  GenerationRun result;
  {
    JsonlAppender appender(cfs_path);
    result = RunGeneration(opts, task, split, *index, *embedder, *chat, tmpl, existing,
                           [&](const CounterfactualRecord& r) { appender.Append(ToJson(r)); });
  }
  WriteCfRecords(cfs_path, result.records);

  auto excluded = CountExclusions(result.records);
  std::optional<double> rate;
  if (!result.records.empty()) rate = SuccessRate(result);
  ojson meta;
  meta["run_id"] = stem;
  meta["generator"] = a.generator;
  meta["generator_model"] = ModelOf(*chat);
  meta["dataset"] = ds.name;
  meta["split"] = a.split;
  meta["edited_field"] = std::string(FieldName(field));
  meta["seed"] = seed;
  meta["template"] = tmpl.version;
  meta["n_records"] = result.records.size();
  meta["n_ok"] = result.records.size() - excluded.total();
  meta["n_violation"] = excluded.template_violation;
  meta["n_refusal"] = excluded.refusal;
  meta["n_transport"] = excluded.transport_failure;
  meta["success_rate"] = OptJson(rate);
  WriteJsonFile(run.Sub("cfs") / (stem + ".meta.json"), meta);
  run.WriteManifest(rc.digest, seed);

  out << "generate: " << result.records.size() << " records, success rate "
      << (rate ? FormatFixed2(*rate) : std::string("—")) << " -> cfs/" << stem
      << ".jsonl\n";
  return kExitOk;
}

struct EvalArgs {
  Common common;
  std::string cfs;
  std::string dataset;
  std::string split = "test";
};

ojson IntrinsicToJson(const IntrinsicReport& r) {
  ojson j;
  j["generator"] = r.generator;
  j["dataset"] = r.dataset;
  j["n_ok"] = r.n_ok;
  j["PPL"] = OptJson(r.ppl);
  j["TS"] = OptJson(r.ts);
  j["FR"] = OptJson(r.fr);
  j["n_violation"] = r.excluded.template_violation;
  j["n_refusal"] = r.excluded.refusal;
  j["n_transport"] = r.excluded.transport_failure;
  j["n_ts_skipped"] = r.n_ts_skipped;
  return j;
}

IntrinsicReport IntrinsicFromJson(const ojson& j, const fs::path& where) {
  IntrinsicReport r;
  r.generator = Text(j, "generator", where);
  r.dataset = Text(j, "dataset", where);
  r.n_ok = Count(j, "n_ok", where);
  r.ppl = OptNumber(j, "PPL", where);
  r.ts = OptNumber(j, "TS", where);
  r.fr = OptNumber(j, "FR", where);
  r.excluded.template_violation = Count(j, "n_violation", where);
  r.excluded.refusal = Count(j, "n_refusal", where);
  r.excluded.transport_failure = Count(j, "n_transport", where);
  r.n_ts_skipped = Count(j, "n_ts_skipped", where);
  return r;
}

int CmdEval(const EvalArgs& a, std::ostream& out) {
  RunConfig rc = LoadRunConfig(a.common.config);
  uint64_t seed = a.common.Seed(&rc);
  const DatasetSpec& ds = rc.Dataset(a.dataset);
  const Task& task = *ds.task;
  SplitName split_name = ParseSplitArg(a.split);
  DatasetSplit split = LoadDataset(ds.SplitPath(split_name), task, split_name);
  auto cfs = LoadCfsChecked(a.cfs, task, split);
  if (cfs.empty()) throw DataError(a.cfs + ": no counterfactual records");
  FactualLookup lookup(split);

  RunDir run(a.common.out);
  auto classifier = MakeClassifier(rc.Provider(ds.classifier, seed), task);
  auto scorer = MakeTokenScorer(rc.Provider(rc.scorer, seed));
  AttachCache(*classifier, run);
  AttachCache(*scorer, run);
  auto measurements = MeasureCounterfactuals(task, lookup, cfs, *classifier, *scorer);

  std::string stem = StripSuffix(fs::path(a.cfs).filename().string(), ".jsonl");
  fs::path eval_dir = run.Sub("eval");
  std::vector<ojson> rows;
  for (const auto& m : measurements) rows.push_back(ToJson(m));
  WriteJsonl(eval_dir / (stem + ".measurements.jsonl"), rows);

  std::string generator = cfs.front().generator;
  IntrinsicReport report = AggregateIntrinsic(generator, ds.name, cfs, measurements);
  ojson j = IntrinsicToJson(report);
  j["split"] = a.split;
  j["edited_field"] = std::string(FieldName(cfs.front().edited_field));
  j["seed"] = seed;
  j["source"] = fs::path(a.cfs).filename().string();
  if (task.is_pair()) {
    auto cp = CopyPasteRate(lookup, cfs);
    ojson c;
    c["n_checked"] = cp.n_checked;
    c["n_copy"] = cp.n_copy;
    c["pct"] = OptJson(cp.pct);
    c["cf_ids"] = cp.copy_ids;
    j["copy_paste"] = c;
  }
  WriteJsonFile(eval_dir / (stem + ".intrinsic.json"), j);
  run.WriteManifest(rc.digest, seed);
  out << RenderCsv(IntrinsicTable({report}));
  return kExitOk;
}

struct JudgeArgs {
  Common common;
  std::string cfs;
  std::string dataset;
  std::string split = "test";
  std::string judge;
  std::string mode = "honest";
  std::string aspects = "FL,UA,RS";
};

int CmdJudge(const JudgeArgs& a, std::ostream& out) {
  RunConfig rc = LoadRunConfig(a.common.config);
  uint64_t seed = a.common.Seed(&rc);
  const DatasetSpec& ds = rc.Dataset(a.dataset);
  const Task& task = *ds.task;
  SplitName split_name = ParseSplitArg(a.split);
  DatasetSplit split = LoadDataset(ds.SplitPath(split_name), task, split_name);
  auto cfs = LoadCfsChecked(a.cfs, task, split);
  if (cfs.empty()) throw DataError(a.cfs + ": no counterfactual records");
  FactualLookup lookup(split);
  auto mode = ParseJudgeMode(a.mode);
  if (!mode) throw InvalidArgument("--mode must be honest, corrupted or classify");
  JudgeOptions opts;
  opts.mode = *mode;
  opts.seed = seed;
  if (*mode != JudgeMode::kClassify) opts.aspects = ParseAspects(a.aspects);

  RunDir run(a.common.out);
  auto chat = MakeChatProvider(rc.Provider(a.judge, seed));
  AttachCache(*chat, run);
  JudgeTemplate tmpl = rc.judge_template.empty() ? JudgeTemplate::Default()
                                                 : JudgeTemplate::Load(rc.judge_template);

  const std::string generator = cfs.front().generator;
  bool self_judging = false;
  if (rc.root.contains("provider") && rc.root["provider"].contains(generator)) {
    std::string gen_model = GetString(rc.ProviderTable(generator), "model", generator);
    self_judging = IsSelfJudging(ModelOf(*chat), gen_model);
  }
  if (self_judging) {
    spdlog::info("judge model {} also generated these counterfactuals; scores may favour "
                 "its own outputs",
                 ModelOf(*chat));
  }

  std::string stem = StripSuffix(fs::path(a.cfs).filename().string(), ".jsonl") + "." +
                     a.judge + "." + a.mode;
  fs::path judge_dir = run.Sub("judge");
  fs::path path = judge_dir / (stem + ".jsonl");
  std::vector<JudgeRecord> existing;
  if (fs::exists(path)) existing = LoadJudgeRecords(path);
  std::vector<JudgeRecord> records;
  {
    JsonlAppender appender(path);
    records = RunJudge(opts, task, lookup, cfs, *chat, tmpl, existing,
                       [&](const JudgeRecord& r) { appender.Append(ToJson(r)); });
  }
  WriteJudgeRecords(path, records);

  ojson meta;
  meta["generator"] = generator;
  meta["dataset"] = ds.name;
  meta["split"] = a.split;
  meta["edited_field"] = std::string(FieldName(cfs.front().edited_field));
  meta["judge"] = a.judge;
  meta["judge_model"] = ModelOf(*chat);
  meta["mode"] = a.mode;
  ojson aspects = ojson::array();
  if (*mode != JudgeMode::kClassify) {
    for (Aspect x : opts.aspects) aspects.push_back(std::string(AspectName(x)));
  }
  meta["aspects"] = aspects;
  meta["seed"] = seed;
  meta["template"] = tmpl.version;
  meta["self_judging"] = self_judging;
  size_t n_ok = 0;
  for (const auto& r : records) n_ok += r.ok() ? 1 : 0;
  meta["n_records"] = records.size();
  meta["n_parsed"] = n_ok;
  meta["source"] = fs::path(a.cfs).filename().string();
  WriteJsonFile(judge_dir / (stem + ".meta.json"), meta);
  run.WriteManifest(rc.digest, seed);
  out << "judge: " << records.size() << " records (" << n_ok << " parsed) -> judge/"
      << stem << ".jsonl\n";
  return kExitOk;
}

struct AugmentArgs {
  Common common;
  std::string train;
  std::vector<std::string> cfs;
  std::string task;
  std::string dataset;
};

int CmdAugment(const AugmentArgs& a, std::ostream& out) {
  std::optional<RunConfig> rc;
  if (!a.common.config.empty()) rc = LoadRunConfig(a.common.config);
  uint64_t seed = a.common.Seed(rc ? &*rc : nullptr);
  std::optional<Task> task;
  std::string train = a.train;
  if (!a.task.empty()) {
    task = LoadTaskSpec(a.task, ".");
  } else if (rc && !a.dataset.empty()) {
    const DatasetSpec& ds = rc->Dataset(a.dataset);
    task = *ds.task;
    if (train.empty()) train = ds.SplitPath(SplitName::kTrain).string();
  } else {
    throw InvalidArgument("augment needs --task, or --config with --dataset");
  }
  if (train.empty()) throw InvalidArgument("augment needs --train");
  if (a.common.out.empty()) throw InvalidArgument("augment needs --out FILE");
  DatasetSplit original = LoadDataset(train, *task, SplitName::kTrain);
  std::vector<CounterfactualRecord> cfs;
  for (const auto& path : a.cfs) {
    auto part = LoadCfRecords(path);
    cfs.insert(cfs.end(), part.begin(), part.end());
  }
  AugmentResult result = AugmentExport(*task, original, cfs, seed);
  fs::path out_path(a.common.out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  WriteDataset(out_path, result.dataset, *task);
  ojson counts;
  counts["n_original"] = result.n_original;
  counts["n_cf"] = result.n_cf;
  counts["n_excluded"] = result.n_excluded;
  counts["seed"] = seed;
  WriteJsonFile(fs::path(out_path.string() + ".counts.json"), counts);
  out << ToJsonLine(counts) << "\n";
  return kExitOk;
}

struct ReportArgs {
  Common common;
  std::string kind;
  std::string format = "csv";
  std::string accuracy;
  std::string dataset;
  std::string include;
};

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& part : Split(s, ',')) {
    std::string t(Trim(part));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

struct EvalEntry {
  IntrinsicReport report;
  ojson raw;
  fs::path path;
};

std::vector<EvalEntry> LoadEvals(const RunDir& run, const std::string& dataset) {
  std::vector<EvalEntry> out;
  for (const auto& p : ListFiles(run.root() / "eval", ".intrinsic.json")) {
    ojson j = ReadJsonFile(p);
    IntrinsicReport r = IntrinsicFromJson(j, p);
    if (!dataset.empty() && r.dataset != dataset) continue;
    out.push_back({std::move(r), std::move(j), p});
  }
  return out;
}

struct JudgeFile {
  ojson meta;
  std::vector<JudgeRecord> records;
};

std::vector<JudgeFile> LoadJudgeFiles(const RunDir& run, const std::string& dataset) {
  std::vector<JudgeFile> out;
  for (const auto& meta_path : ListFiles(run.root() / "judge", ".meta.json")) {
    JudgeFile f;
    f.meta = ReadJsonFile(meta_path);
    if (!dataset.empty() && Text(f.meta, "dataset", meta_path) != dataset) continue;
    fs::path records = meta_path.parent_path() /
                       (StripSuffix(meta_path.filename().string(), ".meta.json") + ".jsonl");
    f.records = LoadJudgeRecords(records);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Aspect> MetaAspects(const ojson& meta) {
  std::vector<Aspect> out;
  for (const auto& a : meta.at("aspects")) {
    if (auto parsed = ParseAspect(a.get<std::string>())) out.push_back(*parsed);
  }
  return out;
}

std::optional<ScoreDistribution> TryDistribution(const std::vector<JudgeRecord>& records,
                                                 Aspect aspect, size_t* n_failed) {
  try {
    auto d = ComputeScoreDistribution(records, aspect);
    *n_failed = d.n_failed;
    return d;
  } catch (const InvalidArgument&) {
    *n_failed = records.size();
    return std::nullopt;
  }
}

std::vector<ReportTable> JudgeTables(const std::vector<JudgeFile>& files) {
  std::vector<JudgeTableRow> rows;
  std::vector<ClassifyTableRow> cls;
  // (generator, dataset, set, aspect) -> (field -> distribution)
  std::map<std::tuple<std::string, std::string, std::string, Aspect>,
           std::map<std::string, ScoreDistribution>>
      by_field;
  for (const auto& f : files) {
    fs::path where("judge meta");
    std::string gen = Text(f.meta, "generator", where);
    std::string dataset = Text(f.meta, "dataset", where);
    std::string field = Text(f.meta, "edited_field", where);
    std::string mode = Text(f.meta, "mode", where);
    if (mode == "classify") {
      cls.push_back({gen, dataset, field, ComputeClassifyAccuracy(f.records)});
      continue;
    }
    for (Aspect a : MetaAspects(f.meta)) {
      JudgeTableRow row{gen, dataset, field, mode, std::string(AspectName(a)), {}, 0};
      row.dist = TryDistribution(f.records, a, &row.n_failed);
      if (row.dist && field != "text") {
        by_field[{gen, dataset, mode, a}][field] = *row.dist;
      }
      rows.push_back(std::move(row));
    }
  }
  for (const auto& [key, fields] : by_field) {
    auto p = fields.find("premise");
    auto h = fields.find("hypothesis");
    if (p == fields.end() || h == fields.end()) continue;
    const auto& [gen, dataset, mode, aspect] = key;
    JudgeTableRow row{gen, dataset, "avg", mode, std::string(AspectName(aspect)), {}, 0};
    row.dist = AverageDistributions(p->second, h->second);
    row.n_failed = row.dist->n_failed;
    rows.push_back(std::move(row));
  }
  return {DistributionTable(rows), ClassifyTable(cls)};
}

// Mean honest-set score per generator, pooled over the judge files given.
std::vector<JudgeSummary> HonestSummaries(const std::vector<JudgeFile>& files,
                                          bool per_field) {
  std::map<std::pair<std::string, std::string>, std::array<std::pair<double, size_t>, 3>>
      sums;
  for (const auto& f : files) {
    fs::path where("judge meta");
    if (Text(f.meta, "mode", where) != "honest") continue;
    std::string gen = Text(f.meta, "generator", where);
    std::string set = per_field ? Text(f.meta, "dataset", where) + "/" +
                                      Text(f.meta, "edited_field", where)
                                : Text(f.meta, "dataset", where);
    auto& acc = sums[{gen, set}];
    for (const auto& r : f.records) {
      if (!r.ok()) continue;
      for (size_t i = 0; i < 3; ++i) {
        if (auto v = r.scores.Get(static_cast<Aspect>(i))) {
          acc[i].first += *v;
          ++acc[i].second;
        }
      }
    }
  }
  std::vector<JudgeSummary> out;
  for (const auto& [key, acc] : sums) {
    JudgeSummary s;
    s.generator = key.first;
    s.set = key.second;
    std::array<std::optional<double>*, 3> slots = {&s.fl, &s.ua, &s.rs};
    for (size_t i = 0; i < 3; ++i) {
      if (acc[i].second > 0) *slots[i] = acc[i].first / static_cast<double>(acc[i].second);
    }
    out.push_back(std::move(s));
  }
  return out;
}

ReportTable CopyPasteTable(const std::vector<EvalEntry>& evals) {
  ReportTable t{"copypaste",
                {"generator", "dataset", "field", "n_checked", "n_copy", "copy_paste_pct"},
                {}};
  for (const auto& e : evals) {
    auto it = e.raw.find("copy_paste");
    if (it == e.raw.end()) continue;
    t.rows.push_back({e.report.generator, e.report.dataset,
                      Text(e.raw, "edited_field", e.path),
                      Cell(static_cast<int64_t>(Count(*it, "n_checked", e.path))),
                      Cell(static_cast<int64_t>(Count(*it, "n_copy", e.path))),
                      OptionalCell(OptNumber(*it, "pct", e.path))});
  }
  return t;
}

int CmdReport(const ReportArgs& a, std::ostream& out) {
  std::optional<RunConfig> rc;
  if (!a.common.config.empty()) rc = LoadRunConfig(a.common.config);
  std::optional<uint64_t> seed = a.common.KnownSeed(rc ? &*rc : nullptr);
  if (a.format != "csv" && a.format != "markdown") {
    throw InvalidArgument("--format must be csv or markdown");
  }
  RunDir run(a.common.out);
  std::vector<std::pair<std::string, ReportTable>> tables;
  auto include = SplitList(a.include);
  if (a.kind == "intrinsic" || a.kind == "success" || a.kind == "copypaste") {
    auto evals = LoadEvals(run, a.dataset);
    std::vector<IntrinsicReport> reports;
    for (const auto& e : evals) reports.push_back(e.report);
    if (a.kind == "intrinsic") tables.emplace_back("intrinsic", IntrinsicTable(reports));
    if (a.kind == "success") tables.emplace_back("success", SuccessTable(reports));
    if (a.kind == "copypaste") tables.emplace_back("copypaste", CopyPasteTable(evals));
  } else if (a.kind == "judge") {
    auto files = LoadJudgeFiles(run, a.dataset);
    auto t = JudgeTables(files);
    tables.emplace_back("judge", t[0]);
    if (!t[1].rows.empty()) tables.emplace_back("judge_classify", t[1]);
    tables.emplace_back("judge_scores", JudgeAverageTable(HonestSummaries(files, true)));
  } else if (a.kind == "correlation") {
    auto evals = LoadEvals(run, a.dataset);
    std::set<std::string> datasets;
    std::vector<IntrinsicReport> reports;
    for (const auto& e : evals) {
      datasets.insert(e.report.dataset);
      reports.push_back(e.report);
    }
    if (datasets.size() > 1) {
      throw InvalidArgument("eval results cover several datasets; pass --dataset");
    }
    std::vector<CorrelationRow> rows;
    if (!a.accuracy.empty()) {
      auto acc = CorrelateAccuracy(reports, LoadAccuracyTable(a.accuracy), include);
      rows.insert(rows.end(), acc.begin(), acc.end());
    }
    auto summaries = HonestSummaries(LoadJudgeFiles(run, a.dataset), false);
    if (!summaries.empty()) {
      auto jr = CorrelateJudge(reports, summaries, include);
      rows.insert(rows.end(), jr.begin(), jr.end());
    }
    if (rows.empty()) {
      throw DataError("nothing to correlate: pass --accuracy or run judge in honest mode");
    }
    tables.emplace_back("correlation", CorrelationTable(rows));
  } else {
    throw InvalidArgument("unknown report kind \"" + a.kind + "\"");
  }
  fs::path dir = run.Sub("reports");
  for (const auto& [name, table] : tables) {
    std::string csv = RenderCsv(table);
    std::string md = RenderMarkdown(table);
    WriteTextFile(dir / (name + ".csv"), csv);
    WriteTextFile(dir / (name + ".md"), md);
    out << (a.format == "csv" ? csv : md);
  }
  run.WriteManifest(rc ? rc->digest : "", seed);
  return kExitOk;
}

struct ValidateArgs {
  Common common;
  std::string dataset;
  std::string task;
  std::string cfs;
};

int CmdValidate(const ValidateArgs& a, std::ostream& out) {
  if (a.common.config.empty()) {
    if (a.dataset.empty() || a.task.empty()) {
      throw InvalidArgument("validate needs --dataset FILE --task TASK, or --config");
    }
    Task task = LoadTaskSpec(a.task, ".");
    DatasetSplit split = LoadDataset(a.dataset, task);
    if (!a.cfs.empty()) LoadCfsChecked(a.cfs, task, split);
    out << "ok: " << a.dataset << ": " << split.instances.size() << " instances\n";
    return kExitOk;
  }
  RunConfig rc = LoadRunConfig(a.common.config);
  if (rc.datasets.empty()) throw ConfigError(a.common.config + ": no [dataset] tables");
  for (const auto& [name, ds] : rc.datasets) {
    if (!a.dataset.empty() && name != a.dataset) continue;
    std::vector<DatasetSplit> splits;
    for (const auto& [split_name, path] : ds.splits) {
      splits.push_back(LoadDataset(path, *ds.task, split_name));
      out << "ok: " << name << "/" << SplitNameString(split_name) << ": "
          << splits.back().instances.size() << " instances\n";
    }
    std::vector<const DatasetSplit*> ptrs;
    for (const auto& s : splits) ptrs.push_back(&s);
    CheckDisjointSplits(ptrs);
    if (!ds.reference_cfs.empty()) {
      DatasetSplit ref = LoadDataset(ds.SplitPath(ds.reference_split), *ds.task,
                                     ds.reference_split);
      auto cfs = LoadCfsChecked(ds.reference_cfs, *ds.task, ref);
      out << "ok: " << name << "/reference_cfs: " << cfs.size() << " records\n";
    }
  }
  return kExitOk;
}

std::string OneLine(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void SetUpLogging(bool quiet, bool verbose) {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("cfx");
    l->set_pattern("cfx: %l: %v");
    return l;
  }();
  spdlog::set_default_logger(logger);
  spdlog::set_level(quiet ? spdlog::level::warn
                          : verbose ? spdlog::level::debug : spdlog::level::info);
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Counterfactual generation and evaluation toolkit", "cfx"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(CFX_VERSION));
  bool quiet = false;
  bool verbose = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Generate counterfactuals for a split");
  AddCommon(gen_cmd, gen.common);
  gen_cmd->add_option("--dataset", gen.dataset, "Dataset name from the config")->required();
  gen_cmd->add_option("--split", gen.split, "Split to generate for")
      ->check(CLI::IsMember({"train", "validation", "test"}));
  gen_cmd->add_option("--generator", gen.generator, "Chat provider name")->required();
  gen_cmd->add_option("--edited-field", gen.edited_field, "premise or hypothesis (pair tasks)")
      ->check(CLI::IsMember({"text", "premise", "hypothesis"}));
  gen_cmd->add_option("--target", gen.target, "Force this target label");
  gen_cmd->add_option("--limit", gen.limit, "Only the first N instances");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Intrinsic metrics (FR, TS, PPL)");
  AddCommon(eval_cmd, ev.common);
  eval_cmd->add_option("--cfs", ev.cfs, "Counterfactual records file")->required();
  eval_cmd->add_option("--dataset", ev.dataset, "Dataset name from the config")->required();
  eval_cmd->add_option("--split", ev.split, "Split the records were generated from")
      ->check(CLI::IsMember({"train", "validation", "test"}));

  JudgeArgs jd;
  auto* judge_cmd = app.add_subcommand("judge", "LLM-as-judge scoring or classification");
  AddCommon(judge_cmd, jd.common);
  judge_cmd->add_option("--cfs", jd.cfs, "Counterfactual records file")->required();
  judge_cmd->add_option("--dataset", jd.dataset, "Dataset name from the config")->required();
  judge_cmd->add_option("--split", jd.split, "Split the records were generated from")
      ->check(CLI::IsMember({"train", "validation", "test"}));
  judge_cmd->add_option("--judge", jd.judge, "Chat provider name of the judge")->required();
  judge_cmd->add_option("--mode", jd.mode, "honest, corrupted or classify")
      ->check(CLI::IsMember({"honest", "corrupted", "classify"}));
  judge_cmd->add_option("--aspects", jd.aspects, "Comma list of FL, UA, RS");

  AugmentArgs au;
  auto* aug_cmd = app.add_subcommand("augment", "Export originals plus counterfactuals");
  AddCommon(aug_cmd, au.common);
  aug_cmd->add_option("--train", au.train, "Original training split");
  aug_cmd->add_option("--cfs", au.cfs, "Counterfactual records file (repeatable)")
      ->required();
  aug_cmd->add_option("--task", au.task, "Task file or builtin name");
  aug_cmd->add_option("--dataset", au.dataset, "Dataset name from the config");

  ReportArgs rp;
  auto* rep_cmd = app.add_subcommand("report", "Render tables from stored results");
  AddCommon(rep_cmd, rp.common);
  rep_cmd->add_option("--kind", rp.kind, "Report kind")
      ->required()
      ->check(CLI::IsMember({"intrinsic", "judge", "correlation", "success", "copypaste"}));
  rep_cmd->add_option("--format", rp.format, "Format printed to stdout")
      ->check(CLI::IsMember({"csv", "markdown"}));
  rep_cmd->add_option("--accuracy", rp.accuracy, "Accuracy table CSV (correlation)");
  rep_cmd->add_option("--dataset", rp.dataset, "Restrict to one dataset");
  rep_cmd->add_option("--include", rp.include, "Comma list of generators to correlate");

  ValidateArgs va;
  auto* val_cmd = app.add_subcommand("validate", "Check datasets and pairings");
  AddCommon(val_cmd, va.common);
  val_cmd->add_option("--dataset", va.dataset, "Dataset file, or name with --config");
  val_cmd->add_option("--task", va.task, "Task file or builtin name");
  val_cmd->add_option("--cfs", va.cfs, "Counterfactual records to check against it");

  std::vector<const char*> argv = {"cfx"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "cfx: error: usage: " << OneLine(e.what()) << "\n";
    const CLI::App* shown = &app;
    for (const auto* sub : app.get_subcommands()) shown = sub;
    err << shown->help();
    return kExitUsage;
  }

  SetUpLogging(quiet, verbose);
  try {
    if (*gen_cmd) return CmdGenerate(gen, out);
    if (*eval_cmd) return CmdEval(ev, out);
    if (*judge_cmd) return CmdJudge(jd, out);
    if (*aug_cmd) return CmdAugment(au, out);
    if (*rep_cmd) return CmdReport(rp, out);
    if (*val_cmd) return CmdValidate(va, out);
  } catch (const Error& e) {
    err << "cfx: error: " << e.kind() << ": " << OneLine(e.what()) << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "cfx: error: internal: " << OneLine(e.what()) << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int Dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return RunCli(args, std::cout, std::cerr);
}

}  // namespace cfx
