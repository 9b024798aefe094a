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

// Infinite-depth limit of deep linear chains: a matrix field A_s on a uniform
// grid, state and adjoint solves, the functional gradient flow, its conserved
// field, and the intrinsic flow on the end state Z_1.

#ifndef IFLOW_NEURAL_ODE_H_
#define IFLOW_NEURAL_ODE_H_

#include <functional>
#include <vector>

#include "iflow/flows.h"
#include "iflow/linalg.h"
#include "iflow/objectives.h"

namespace iflow {

// Samples A_0 .. A_{L-1} at s_k = k / L.
struct FieldGrid {
  std::vector<Matrix> samples;

  int size() const { return static_cast<int>(samples.size()); }
  double h() const { return 1.0 / static_cast<double>(samples.size()); }
  Eigen::Index dim() const { return samples.front().rows(); }

  Vector Stack() const;
  static FieldGrid Unstack(const Vector& flat, int size, Eigen::Index dim);
  // Throws ShapeError unless non-empty with equal square samples.
  void Validate() const;
};

using FieldFunction = std::function<Matrix(double)>;

FieldGrid SampleField(const FieldFunction& fn, int size);

// Euler: X_{k+1} = X_k + h A_k X_k, X_0 = I. RK4 uses the linear interpolant
// of the samples (extrapolated on the last cell). Returns X_0 .. X_L.
std::vector<Matrix> StateSolve(const FieldGrid& field, Scheme scheme);
// RK4 on the continuous field with `steps` uniform steps.
std::vector<Matrix> StateSolve(const FieldFunction& fn, int steps);

// Gradient of f(X_L) with respect to A_k, divided by h:
// g_k = Lambda_{k+1} X_k^T, Lambda_L = grad f(X_L),
// Lambda_k = (I + h A_k)^T Lambda_{k+1}.
std::vector<Matrix> DiscreteAdjointGradient(const FieldGrid& field,
                                            const Objective& obj);

struct FunctionalFlow {
  Trajectory fields;  // stacked vec(A_k)
  Trajectory z1;      // vec(X_L) at the same times
};

// RK4 in t of dA_k/dt = -g_k.
FunctionalFlow FunctionalGradientFlow(const FieldGrid& field0,
                                      const Objective& obj, double t_final,
                                      double dt, int record_every = 1);

// h_k = A'_k + A'_k^T + [A_k^T, A_k] with central differences inside and
// second-order one-sided stencils at both ends. Needs L >= 3.
std::vector<Matrix> ConservedField(const FieldGrid& field);

// max_k |h_k(t) - h_k(0)|_F along a functional flow.
double ConservedFieldDrift(const FunctionalFlow& flow, int size,
                           Eigen::Index dim);

// (U_{k+1}^T U_{k+1} - U_k U_k^T) / h^2 for U_k = I + h A_k, k = 0..L-2. The
// Euler chain conserves this exactly; it is a first-order approximation of h_s.
std::vector<Matrix> ChainConservedField(const FieldGrid& field);

double ChainConservedFieldDrift(const FunctionalFlow& flow, int size,
                                Eigen::Index dim);

class LambdaProfile {
 public:
  enum class Kind { kConstant, kLinear, kQuadratic, kSampled };

  static LambdaProfile Constant(double c);
  static LambdaProfile Linear(double c);     // c s
  static LambdaProfile Quadratic(double c);  // c s^2
  // Values on a uniform grid of [0, 1], linear interpolation in between.
  static LambdaProfile Sampled(std::vector<double> values);

  Kind kind() const { return kind_; }
  double Value(double s) const;
  // int_0^s lambda.
  double Integral(double s) const;

 private:
  LambdaProfile(Kind kind, double c, std::vector<double> values)
      : kind_(kind), c_(c), values_(std::move(values)) {}

  Kind kind_;
  double c_;
  std::vector<double> values_;
};

// A_k = A0 + (1/2) (int_0^{s_k} lambda) I for symmetric A0.
FieldGrid RelaxedField(const LambdaProfile& lambda, const Matrix& a0, int size);

// Gauss-Legendre rule on [0, 1]. Construction verifies exactness on s^p for
// p <= 2 n - 1 and throws NumericalError otherwise.
class QuadratureRule {
 public:
  explicit QuadratureRule(int nodes = 32);

  const Vector& nodes() const { return nodes_; }
  const Vector& weights() const { return weights_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  double Integrate(const std::function<double(double)>& f) const;

 private:
  Vector nodes_;
  Vector weights_;
};

// gamma(s) = (1 - s) psi1(1) - psi1(1 - s) - s psi2(1) + psi2(s) with
// psi1(s) = int_0^s int_0^u lambda(1 - v) dv du and
// psi2(s) = int_0^s int_0^u lambda(v) dv du, both tabulated by composite
// Simpson on `panels` panels and evaluated by cubic Hermite interpolation.
class GammaProfile {
 public:
  GammaProfile(const LambdaProfile& lambda, const QuadratureRule& rule,
               int panels = 2048);

  double operator()(double s) const;
  // gamma at the quadrature nodes of the rule given at construction.
  const Vector& at_nodes() const { return at_nodes_; }
  // max |gamma| over the nodes and a uniform grid of 257 points.
  double MaxAbs() const;

 private:
  struct Table {
    std::vector<double> value;  // psi at grid points
    std::vector<double> slope;  // int_0^u lambda at grid points
    double Eval(double s, int panels) const;
  };

  int panels_;
  Table psi1_;
  Table psi2_;
  Vector at_nodes_;
};

// -int_0^1 (Z Z^T)^{1-s} exp(gamma(s)) G (Z^T Z)^s ds with the rule; the
// integrand is assembled in the eigenbases of Z Z^T and Z^T Z.
Matrix InfiniteDepthRhs(const Matrix& z1, const Vector& gamma_at_nodes,
                        const Matrix& g, const QuadratureRule& rule);
IntrinsicRhs InfiniteDepthIntrinsic(Vector gamma_at_nodes,
                                    QuadratureRule rule);

struct EulerConvergence {
  int size = 0;
  double error_coarse = 0.0;  // sup_k |X_k - Z(s_k)| at L
  double error_fine = 0.0;    // same at 2 L
  double ratio = 0.0;
};

// Reference path by RK4 with step h / 16 on the continuous field.
EulerConvergence EulerConvergenceCheck(const FieldFunction& fn, int size);

struct PerturbedBalance {
  double eta = 0.0;  // L^2 max_k |U_{k+1}^T U_{k+1} - U_k U_k^T - h^2 lambda_k I|
  double lhs = 0.0;  // max_j |S_j - prod_k (U_{L-1} U_{L-1}^T - a_k I)|
};

// U_k = I + h A_k with lambda_k = lambda(s_k).
PerturbedBalance PerturbedBalanceCheck(const FieldGrid& field,
                                       const LambdaProfile& lambda);

// exp(A) for symmetric A.
Matrix ExpSym(const Matrix& a);

}  // namespace iflow

#endif  // IFLOW_NEURAL_ODE_H_
