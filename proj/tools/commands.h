/*
 * Copyright 2026 The RNF Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RNF_TOOLS_COMMANDS_H_
#define RNF_TOOLS_COMMANDS_H_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "rnf/config.h"
#include "rnf/data.h"

namespace rnf::tools {

enum ExitCode {
  kOk = 0,
  kConfigFailure = 1,
  kRuntimeFailure = 2,
  kUndefinedMetrics = 3,
};

// Parses argv, runs one subcommand and maps exceptions to exit codes.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

// Output root: $RNF_OUT_DIR when set, else the `out_dir` key.
std::filesystem::path OutputRoot(const config::RunConfig& config);

// Dataset from the `data`/`schema` keys, or the synthetic generator when
// `data` is empty, split with the configured seed.
data::Splits LoadSplits(const config::RunConfig& config);

}  // namespace rnf::tools

#endif  // RNF_TOOLS_COMMANDS_H_
