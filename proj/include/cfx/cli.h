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

// Command-line entry point: generate, eval, judge, augment, report and
// validate subcommands over a run directory.

#ifndef CFX_CLI_H_
#define CFX_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace cfx {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// `args` excludes the program name. Errors are reported on `err` as a single
// line "cfx: error: <kind>: <message>".
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int Dispatch(int argc, char** argv);

}  // namespace cfx

#endif  // CFX_CLI_H_
