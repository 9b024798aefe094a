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

#ifndef IFLOW_TOOLS_CLI_EXPERIMENTS_H_
#define IFLOW_TOOLS_CLI_EXPERIMENTS_H_

#include <filesystem>
#include <string>
#include <vector>

#include "config.h"

namespace iflow::cli {

struct Check {
  std::string name;
  double value = 0.0;
  std::string op;  // "<=", ">=" or "=="
  double threshold = 0.0;
  bool pass = false;
};

struct ExperimentResult {
  Json summary = Json::object();
  std::vector<Check> checks;
  std::vector<std::string> files;  // relative to the output dir

  void AddCheck(const std::string& name, double value, const std::string& op,
                double threshold);
  void AddFlag(const std::string& name, bool value);
  bool passed() const;
};

// Runs one validated config, writing its CSVs into `dir` with the configured
// prefix. Files already written are listed in `result` when a NumericalError
// escapes.
void RunExperiment(const ExperimentConfig& config,
                   const std::filesystem::path& dir, ExperimentResult& result);

Json CheckToJson(const Check& c);

}  // namespace iflow::cli

#endif  // IFLOW_TOOLS_CLI_EXPERIMENTS_H_
