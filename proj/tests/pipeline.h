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


// The offline end-to-end run shared by the CLI tests and the acceptance
// binary.

#ifndef CFX_TESTS_PIPELINE_H_
#define CFX_TESTS_PIPELINE_H_

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cfx/cli.h"
#include "test_util.h"

namespace cfx::testing {

using Command = std::vector<std::string>;

inline std::vector<Command> OfflinePipeline(const std::filesystem::path& out) {
  const std::string cfg = SourcePath("configs/offline.toml").string();
  const std::string dir = out.string();
  const std::string cfs = dir + "/cfs/";
  auto with = [&](Command c) {
    c.insert(c.end(), {"--config", cfg, "--out", dir});
    return c;
  };
  std::vector<Command> cmds;
  cmds.push_back(with({"generate", "--dataset", "sa", "--split", "train", "--generator", "rewriter"}));
  cmds.push_back(with({"generate", "--dataset", "sa", "--split", "train", "--generator", "careful"}));
  for (const char* field : {"hypothesis", "premise"}) {
    cmds.push_back(with({"generate", "--dataset", "nli", "--split", "test", "--generator",
                         "rewriter", "--edited-field", field}));
  }
  for (const char* gen : {"rewriter", "careful"}) {
    cmds.push_back(with({"eval", "--cfs", cfs + gen + ".sa.train.jsonl", "--dataset", "sa",
                         "--split", "train"}));
  }
  cmds.push_back(with({"eval", "--cfs", SourcePath("data/sa/validation_cfs.jsonl").string(),
                       "--dataset", "sa", "--split", "validation"}));
  for (const char* field : {"hypothesis", "premise"}) {
    cmds.push_back(with({"eval", "--cfs", cfs + "rewriter.nli.test." + field + ".jsonl",
                         "--dataset", "nli"}));
  }
  for (const char* gen : {"rewriter", "careful"}) {
    for (const char* mode : {"honest", "corrupted"}) {
      cmds.push_back(with({"judge", "--cfs", cfs + gen + ".sa.train.jsonl", "--dataset", "sa",
                           "--split", "train", "--judge", "judge-sa", "--mode", mode}));
    }
  }
  for (const char* field : {"hypothesis", "premise"}) {
    for (const char* mode : {"honest", "corrupted", "classify"}) {
      cmds.push_back(with({"judge", "--cfs", cfs + "rewriter.nli.test." + field + ".jsonl",
                           "--dataset", "nli", "--judge", "judge-nli", "--mode", mode}));
    }
  }
  cmds.push_back({"augment", "--config", cfg, "--dataset", "sa", "--cfs",
                  cfs + "rewriter.sa.train.jsonl", "--cfs", cfs + "careful.sa.train.jsonl",
                  "--out", dir + "/augment/sa.train.jsonl"});
  for (const char* kind : {"intrinsic", "success", "judge", "copypaste"}) {
    cmds.push_back(with({"report", "--kind", kind}));
  }
  cmds.push_back(with({"report", "--kind", "correlation", "--dataset", "sa", "--accuracy",
                       SourcePath("data/accuracy.csv").string(), "--format", "markdown"}));
  return cmds;
}

struct PipelineResult {
  int failed_step = -1;  // index of the first non-zero exit, or -1
  std::string error;
};

inline PipelineResult RunPipeline(const std::filesystem::path& out) {
  auto cmds = OfflinePipeline(out);
  for (size_t i = 0; i < cmds.size(); ++i) {
    std::ostringstream o, e;
    Command args = cmds[i];
    args.insert(args.begin(), "-q");
    if (RunCli(args, o, e) != kExitOk) {
      return {static_cast<int>(i), cmds[i][0] + ": " + e.str()};
    }
  }
  return {};
}

inline std::string ReadAll(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Relative path -> bytes for every file outside cache/ and the lock file.
inline std::map<std::string, std::string> Snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string rel = std::filesystem::relative(e.path(), root).generic_string();
    if (rel == ".lock" || rel.rfind("cache/", 0) == 0) continue;
    out[rel] = ReadAll(e.path());
  }
  return out;
}

}  // namespace cfx::testing

#endif  // CFX_TESTS_PIPELINE_H_
