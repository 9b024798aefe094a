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

#ifndef IFLOW_TOOLS_CLI_CONFIG_H_
#define IFLOW_TOOLS_CLI_CONFIG_H_

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "iflow/linalg.h"

namespace iflow::cli {

using Json = nlohmann::json;

// Schema violation; `path` names the offending key ("model.dims[1]").
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what),
        path_(path),
        message_(what) {}
  const std::string& path() const { return path_; }
  const std::string& message() const { return message_; }

 private:
  std::string path_;
  std::string message_;
};

struct ModelSpec {
  std::string kind;  // linear_chain | rank_one | diag_path | attention
  std::vector<Eigen::Index> dims;
  Eigen::Index n = 0, m = 0, r = 0;
  Eigen::Index d1 = 0, dim = 0;
};

struct InitSpec {
  std::string kind = "random";  // random | relaxed_balanced | relaxed_diag_path
  double scale = 1.0;
  std::vector<double> lambda;
  std::vector<double> mu;
  int seed_scan = 1000;
};

struct LossSpec {
  std::string kind = "quadratic";  // quadratic | attention
  std::string target = "random";   // random | identity_random | matrix
  double target_scale = 1.0;
  Matrix matrix;
  Eigen::Index tokens = 4;
};

struct IntegratorSpec {
  double dt = 1e-3;
  double t_final = 1.0;
  std::string scheme = "rk4";
  int record_every = 1;
};

struct OutputSpec {
  std::string dir;
  std::string prefix;
};

struct LambdaSpec {
  std::string kind = "constant";  // constant | linear | quadratic | sampled
  double c = 0.0;
  std::vector<double> values;
};

struct CriteriaSpec {
  int points = 20;
  double min_abs = 0.1;
  int frobenius_depth = 1;
  // Subset of {intersection_trivial, frobenius, dim_w}; unset means all three
  // for monomial models and none otherwise.
  std::optional<std::vector<std::string>> expect;
};

struct CounterexampleSpec {
  Eigen::Index n = 3, m = 3, r = 2;
  int seeds = 20;
};

struct NeuralOdeSpec {
  std::string field = "smooth";  // smooth | relaxed
  int size = 16;
  Eigen::Index dim = 2;
  double field_scale = 0.5;
  LambdaSpec lambda;
  int euler_size = 32;
  int fd_size = 8;
};

struct GammaProbe {
  std::string name;
  LambdaSpec lambda;
  bool expect_zero = false;
};

struct ConvergenceSpec {
  std::vector<int> sizes = {8, 16, 32, 64};
  Eigen::Index dim = 2;
  double a0_scale = 0.5;
  int quadrature_nodes = 32;
  LambdaSpec lambda;
  std::vector<GammaProbe> gamma_probes;
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::optional<ModelSpec> model;
  InitSpec init;
  std::optional<LossSpec> loss;
  IntegratorSpec integrator;
  std::string intrinsic = "auto";
  std::map<std::string, double> tolerances;
  OutputSpec output;
  CriteriaSpec criteria;
  CounterexampleSpec counterexample;
  NeuralOdeSpec neural_ode;
  ConvergenceSpec convergence;
  Json raw;  // the validated document this config came from
};

// A parsed file: the base document plus one config per sweep point (a single
// entry without a sweep).
struct ConfigFile {
  Json document;
  std::vector<ExperimentConfig> points;
  bool is_sweep = false;
};

const std::vector<std::string>& ExperimentNames();

bool IsMonomial(const ModelSpec& m);
// Shape of the target matrix: the lifted matrix for quadratic losses, tokens x
// dim for attention.
std::pair<Eigen::Index, Eigen::Index> TargetShape(const ModelSpec& m,
                                                  const LossSpec& loss);

// Validates and converts one document without a "sweep" key.
ExperimentConfig ParseConfig(const Json& doc);

// Parses text, applies each sweep entry as a JSON merge patch and validates
// every resulting point. Throws SchemaError on any violation.
ConfigFile ParseConfigText(const std::string& text);

// 64-bit FNV-1a of the canonical (sorted-key, compact) dump, as 16 hex digits.
std::string ConfigHash(const Json& doc);

}  // namespace iflow::cli

#endif  // IFLOW_TOOLS_CLI_CONFIG_H_
