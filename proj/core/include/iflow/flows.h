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

// Fixed-step integration of the parameter gradient flow and of the intrinsic
// flows on the lifted variable, with the solvers the intrinsic right-hand
// sides need.

#ifndef IFLOW_FLOWS_H_
#define IFLOW_FLOWS_H_

#include <functional>
#include <string>
#include <vector>

#include "iflow/linalg.h"
#include "iflow/models.h"
#include "iflow/objectives.h"

namespace iflow {

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  // Set when a non-finite state was produced; the recorded samples stop at
  // last_valid_time.
  bool blew_up = false;
  double last_valid_time = 0.0;
  std::string failure;

  std::size_t size() const { return states.size(); }
  const Vector& final_state() const { return states.back(); }
};

using VectorField = std::function<Vector(const Vector&)>;

enum class Scheme { kEuler, kRk4 };

// Fixed-step integration of x' = field(x) on [0, t_final]; the last step is
// shortened to land on t_final. Samples are stored every `record_every` steps
// and always at t = 0 and at the final time.
Trajectory Integrate(const VectorField& field, const Vector& x0,
                     double t_final, double dt, Scheme scheme,
                     int record_every = 1);

inline Trajectory Rk4Integrate(const VectorField& field, const Vector& x0,
                               double t_final, double dt,
                               int record_every = 1) {
  return Integrate(field, x0, t_final, dt, Scheme::kRk4, record_every);
}

// theta' = -dphi(theta)^T grad f(phi(theta)).
VectorField ParamGradientField(const Parametrization& model,
                               const Objective& obj);
Trajectory ParamGradientFlow(const Parametrization& model,
                             const Objective& obj, const Vector& theta0,
                             double t_final, double dt, int record_every = 1);

// Maps every state through phi.
Trajectory LiftTrajectory(const Parametrization& model, const Trajectory& t);

// sup over common sample times of |z1 - z2| / (1 + |z1|). Throws when the two
// trajectories share no sample time.
double TrajectoryCompare(const Trajectory& a, const Trajectory& b);
std::vector<double> TrajectoryErrorSeries(const Trajectory& a,
                                          const Trajectory& b);

// ---------------------------------------------------------------- scalar --

// sqrt(2 tr(S^2) - tr(S)^2 + 4 z^2) for the conserved r x r matrix S.
double ScalarMetric(const Matrix& s, double z);
// sqrt(lambda^2 + 4 z^2).
double ScalarMetric(double lambda, double z);

// -------------------------------------------------------------- two layer --

// U_2 U_2^T and U_1^T U_1 recovered from Z under U_2^T U_2 - U_1 U_1^T =
// lambda I.
struct TwoLayerGrams {
  Matrix outer;  // Pi_{ZZ^T}[lambda / 2 + sqrt(lambda^2 + 4 Z Z^T) / 2]
  Matrix inner;  // Pi_{Z^TZ}[-lambda / 2 + sqrt(lambda^2 + 4 Z^T Z) / 2]
};
TwoLayerGrams TwoLayerGram(const Matrix& z, double lambda);

Matrix TwoLayerRhs(const Matrix& z, double lambda, const Matrix& g);
// I_m kron outer + inner kron I_n.
Matrix TwoLayerMetric(const Matrix& z, double lambda);

// ------------------------------------------------------------ three layer --

struct AlphaBetaOptions {
  double tol = 1e-13;
  int max_iter = 200;
  Vector alpha_start;  // empty means all ones
  Vector beta_start;   // empty means all ones
};

struct AlphaBeta {
  Vector alpha;
  Vector beta;
  int iterations = 0;
  double residual = 0.0;  // max relative residual of the coupled equations
  bool damped = false;
  std::string start;  // "ones" or "custom"
};

// Fixed point of alpha = (lambda + sqrt(lambda^2 + 4 Zsq beta^{-1})) / 2,
// beta = (mu + sqrt(mu^2 + 4 Zsq^T alpha^{-1})) / 2, stopped on the Thompson
// distance between successive iterates.
AlphaBeta SolveAlphaBeta(const Matrix& zsq, const Vector& lambda,
                         const Vector& mu, const AlphaBetaOptions& opts = {});

Matrix ThreeLayerRhs(const Matrix& z, const Vector& lambda, const Vector& mu,
                     const Matrix& g);

// ------------------------------------------------------------ deep linear --

struct PolySpec {
  int depth = 0;
  Vector a;  // a_0 = 0, a_k = sum_{i=1}^k lambda_{L-i}
  Vector b;  // b_0 = 0, b_k = -sum_{i=1}^k lambda_i
};

// lambda holds lambda_1 .. lambda_{L-1}.
PolySpec MakePolySpec(const Vector& lambda);

// prod_k (x - roots_k).
double RootPolynomial(const Vector& roots, double x);
// prod_k (A - roots_k I) for symmetric A.
Matrix RootPolynomial(const Vector& roots, const Matrix& a);

// Unique symmetric X commuting with E, spectrum >= max(0, roots), with
// prod_k (X - roots_k) = E.
Matrix RecoverGram(const Matrix& e, const Vector& roots);

// -sum_j S_j G T_j with S_j, T_j recovered from Z Z^T and Z^T Z.
Matrix DeepLinearRhs(const Matrix& z, const Vector& lambda, const Matrix& g);

// ---------------------------------------------------------------- drivers --

// Right-hand side Z' = rhs(Z, grad f(Z)).
using IntrinsicRhs = std::function<Matrix(const Matrix&, const Matrix&)>;

IntrinsicRhs ScalarIntrinsic(const Matrix& s);
IntrinsicRhs TwoLayerIntrinsic(double lambda);
IntrinsicRhs ThreeLayerIntrinsic(const Vector& lambda, const Vector& mu);
IntrinsicRhs DeepLinearIntrinsic(const Vector& lambda);

Trajectory IntrinsicFlow(const IntrinsicRhs& rhs, const Objective& obj,
                         const Vector& z0, double t_final, double dt,
                         int record_every = 1);

}  // namespace iflow

#endif  // IFLOW_FLOWS_H_
