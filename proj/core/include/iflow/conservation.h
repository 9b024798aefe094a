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

// Conservation-law families, balance measurement and initializers that place
// a parameter on a prescribed conservation level set.

#ifndef IFLOW_CONSERVATION_H_
#define IFLOW_CONSERVATION_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iflow/linalg.h"
#include "iflow/models.h"

namespace iflow {

// A family of quadratic laws h(theta) = B(theta, theta) given by a bilinear
// map B. The Jacobian is assembled from the exact directional derivative
// B(theta, v) + B(v, theta). Symmetric-matrix laws are flattened to their
// upper triangle, row by row.
class LawFamily {
 public:
  using Bilinear = std::function<Vector(const Vector&, const Vector&)>;

  LawFamily(std::string name, Eigen::Index param_dim, Eigen::Index size,
            Bilinear bilinear);

  const std::string& name() const { return name_; }
  Eigen::Index size() const { return size_; }
  Eigen::Index param_dim() const { return param_dim_; }

  Vector Evaluate(const Vector& theta) const;
  Vector Directional(const Vector& theta, const Vector& v) const;
  // size() x param_dim().
  Matrix Jacobian(const Vector& theta) const;

 private:
  void Check(const Vector& theta) const;

  std::string name_;
  Eigen::Index param_dim_;
  Eigen::Index size_;
  Bilinear bilinear_;
};

// Linear chain: h_i = U_{i+1}^T U_{i+1} - U_i U_i^T for i = 1..L-1.
// Rank one: |u_j|^2 - |v_j|^2. Diagonal path: u_i^2 - sum_j V_ij^2 followed by
// w_j^2 - sum_i V_ij^2. Attention: (Q Q^T - K K^T, V V^T - O O^T).
// Throws std::invalid_argument for any other parametrization.
LawFamily LawsFor(const Parametrization& model);

Vector UpperTriangle(const Matrix& a);

struct BalanceReport {
  std::vector<double> lambda;    // trace / n per interface
  std::vector<double> residual;  // |D_i - lambda_i I|_F
  double max_residual = 0.0;
};

BalanceReport Balance(const std::vector<Matrix>& layers);
BalanceReport Balance(const LinearChain& chain, const Vector& theta);

// U_1 with N(0, 1 / n_0) entries, then U_{i+1} = O_i (U_i U_i^T + lambda_i)^{1/2}
// with O_i having orthonormal columns. Throws NumericalError when the square
// root argument is indefinite and ShapeError when a width shrinks.
ParamPoint MakeRelaxedBalanced(const LinearChain& chain,
                               const std::vector<double>& lambda,
                               std::uint64_t seed);

// Diagonal path start with u_i^2 - sum_j V_ij^2 = lambda_i and
// w_j^2 - sum_i V_ij^2 = mu_j, V Gaussian.
ParamPoint MakeRelaxedDiagPath(const DiagPathLift& model,
                               const std::vector<double>& lambda,
                               const std::vector<double>& mu,
                               std::uint64_t seed);

// Gaussian start with entries of variance `scale^2`.
ParamPoint MakeRandom(const Parametrization& model, double scale,
                      std::uint64_t seed);

struct DriftSeries {
  std::vector<double> absolute;  // |h(t) - h(0)|_inf
  std::vector<double> relative;  // absolute / (1 + |h(0)|_inf)

  double max_absolute() const;
  double max_relative() const;
};

DriftSeries ConservationDrift(const std::vector<Vector>& trajectory,
                              const LawFamily& laws);

}  // namespace iflow

#endif  // IFLOW_CONSERVATION_H_
