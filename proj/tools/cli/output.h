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

#ifndef IFLOW_TOOLS_CLI_OUTPUT_H_
#define IFLOW_TOOLS_CLI_OUTPUT_H_

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace iflow::cli {

inline constexpr char kOutputRootEnv[] = "INTRINSIC_FLOW_OUTPUT_ROOT";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Relative dirs resolve against $INTRINSIC_FLOW_OUTPUT_ROOT when set, else the
// working directory. Absolute dirs are used as given.
std::filesystem::path ResolveOutputDir(const std::string& dir);

void MakeDirs(const std::filesystem::path& dir);

// %.17g, with "nan" / "inf" / "-inf" for non-finite values.
std::string FormatDouble(double x);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  void Row(const std::vector<double>& values);
  void Row(const std::vector<std::string>& cells);
  void Close();

 private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::ofstream out_;
};

void WriteJson(const std::filesystem::path& path, const nlohmann::json& doc);
std::string ReadFile(const std::filesystem::path& path);

}  // namespace iflow::cli

#endif  // IFLOW_TOOLS_CLI_OUTPUT_H_
