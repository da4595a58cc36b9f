// Copyright 2026 The clipbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CLIPBENCH_CLI_HPP_
#define CLIPBENCH_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace clipbench {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerificationFailed = 1,
  kExitConfigError = 2,
  kExitTrainingError = 3,
};

// Sends spdlog output to stderr at the level named by CLIPBENCH_LOG
// (error, info or debug; default info).
void configure_logging();

// Runs one subcommand: ranges, verify, train, sweep or report. `args` excludes
// the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace clipbench

#endif  // CLIPBENCH_CLI_HPP_
