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

// Pointwise structural tests on a lifting: kernel inclusion against the
// conservation laws, the Frobenius property of the span of the gradients of
// phi, and the unbalanced two-layer counterexample direction.

#ifndef IFLOW_CRITERIA_H_
#define IFLOW_CRITERIA_H_

#include "iflow/conservation.h"
#include "iflow/linalg.h"
#include "iflow/models.h"

namespace iflow {

struct CriterionReport {
  int dim_ker_phi = 0;
  int dim_ker_h = 0;
  int dim_intersection = 0;
  // max over an orthonormal basis v of ker dphi ∩ ker dh of |dM(theta).v|_F.
  double worst_dm_norm = 0.0;
  // |M(theta)|_F / |theta|, the reference size of dM along a unit direction.
  double scale = 0.0;
  bool intersection_trivial = false;
  bool inclusion_holds = false;
};

// Inclusion holds when worst_dm_norm <= tol * scale (vacuously when the
// intersection is trivial).
CriterionReport KernelInclusionCheck(const Parametrization& model,
                                     const LawFamily& laws,
                                     const Vector& theta, double tol = 1e-6);

struct Counterexample {
  Matrix delta;     // Delta_S + Delta_A
  Matrix h;         // U Delta
  Matrix k;         // -V Delta^T
  Vector theta;     // (U_1, U_2) = (V^T, U) in a linear chain of widths m, r, n
  Vector direction; // (K^T, H) in the same layout
  double dphi_norm = 0.0;
  double dh_norm = 0.0;
  double dm_norm = 0.0;
  // Reference sizes: |v| |dphi|_F, |v| |dh|_F and |v| |M|_F / |theta|.
  double phi_scale = 0.0;
  double h_scale = 0.0;
  double m_scale = 0.0;
};

// U is n x r, V is m x r. Throws NumericalError when S = U^T U - V^T V has
// an eigenvalue gap below 1e-8 |S|_2 (the relaxed balanced case) or when U or
// V is rank deficient.
Counterexample CounterexampleDirection(const Matrix& u, const Matrix& v);

// [grad phi_i, grad phi_j] = H_j grad phi_i - H_i grad phi_j, with closed-form
// monomial Hessians H.
Vector LieBracket(const MonomialLifting& ml, Eigen::Index i, Eigen::Index j,
                  const Vector& theta);

struct FrobeniusResult {
  int dim_span = 0;
  int dim_span_with_brackets = 0;
  bool holds = false;
};

// Compares the numerical rank of {grad phi_i} with the rank after appending
// brackets up to `depth` generations. Depth 1 uses LieBracket; deeper
// generations use exact symbolic Laurent-polynomial fields.
FrobeniusResult FrobeniusCheck(const MonomialLifting& ml, const Vector& theta,
                               int depth = 1, double tol = kRankTol);

}  // namespace iflow

#endif  // IFLOW_CRITERIA_H_
