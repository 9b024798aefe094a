// Copyright 2026 The intrinsic-flow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IFLOW_TOOLS_CLI_APP_H_
#define IFLOW_TOOLS_CLI_APP_H_

#include <ostream>
#include <string>
#include <vector>

namespace iflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitChecksFailed = 1;
inline constexpr int kExitSchema = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

int RunCommand(const std::string& config_path, std::ostream& out,
               std::ostream& err);

// format is "csv" or "markdown"; an empty output path writes to `out`.
int ReportCommand(std::vector<std::string> manifests, const std::string& format,
                  const std::string& output, std::ostream& out,
                  std::ostream& err);

int Main(int argc, char** argv);

}  // namespace iflow::cli

#endif  // IFLOW_TOOLS_CLI_APP_H_
