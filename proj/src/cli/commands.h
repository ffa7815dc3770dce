// Copyright 2026 The backvis Authors
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

// The backvis command line: split, poison, mock, icl, evaluate, defend.

#ifndef BACKVIS_CLI_COMMANDS_H_
#define BACKVIS_CLI_COMMANDS_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace backvis::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

// Environment variable holding the completion-service credential.
inline constexpr char kApiKeyEnv[] = "BACKVIS_API_KEY";

// `args` excludes the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace backvis::cli

#endif  // BACKVIS_CLI_COMMANDS_H_
