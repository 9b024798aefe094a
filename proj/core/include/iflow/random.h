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

#ifndef IFLOW_RANDOM_H_
#define IFLOW_RANDOM_H_

#include <cstdint>
#include <random>

#include "iflow/linalg.h"

namespace iflow {

// Seeded generator threaded explicitly through every random draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double Normal() { return normal_(engine_); }
  double Uniform(double lo, double hi);

  Matrix NormalMatrix(Eigen::Index rows, Eigen::Index cols);
  Vector NormalVector(Eigen::Index size);
  // Gaussian entries with magnitude pushed away from zero: |x| >= min_abs.
  Vector NonzeroVector(Eigen::Index size, double min_abs = 0.1);
  Matrix SymmetricMatrix(Eigen::Index n);
  // rows x cols with orthonormal columns (rows >= cols), Haar distributed.
  Matrix Orthonormal(Eigen::Index rows, Eigen::Index cols);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace iflow

#endif  // IFLOW_RANDOM_H_
