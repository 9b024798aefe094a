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

// Dense real matrix kernel shared by every other module.
//
// Conventions fixed for the whole library:
//  * vec() stacks columns (column-major), so vec(S X T) = (T^T kron S) vec(X).
//  * A numerical rank or kernel is always computed against the threshold
//    kRankTol * sigma_max * max(rows, cols).
//  * PSD matrix functions clamp eigenvalues in [-kClampTol * |A|_2, 0] to 0.

#ifndef IFLOW_LINALG_H_
#define IFLOW_LINALG_H_

#include <functional>

#include <Eigen/Dense>

namespace iflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kRankTol = 1e-10;
inline constexpr double kClampTol = 1e-10;

// Eigendecomposition of a symmetric matrix. Eigenvalues ascending; the
// eigenvector columns are orthonormal.
struct Spectrum {
  Vector eigenvalues;
  Matrix eigenvectors;

  // Q diag(f(lambda)) Q^T.
  Matrix Apply(const std::function<double(double)>& f) const;
  Matrix Reconstruct() const;
};

// Throws ShapeError on non-square input and NumericalError on non-finite
// entries. The input is symmetrized as (A + A^T) / 2.
Spectrum SymEig(const Matrix& a);

enum class PsdFunctionKind { kSqrt, kPow, kLog };

struct PsdFunction {
  PsdFunctionKind kind = PsdFunctionKind::kSqrt;
  double exponent = 0.5;

  static PsdFunction Sqrt() { return {PsdFunctionKind::kSqrt, 0.5}; }
  static PsdFunction Pow(double s) { return {PsdFunctionKind::kPow, s}; }
  static PsdFunction Log() { return {PsdFunctionKind::kLog, 0.0}; }
};

// Q f(Lambda) Q^T for a symmetric PSD matrix (SPD for log).
Matrix MatFunPsd(const Matrix& a, PsdFunction f, double clamp_tol = kClampTol);
Matrix MatFunPsd(const Spectrum& spectrum, PsdFunction f,
                 double clamp_tol = kClampTol);

inline Matrix SqrtPsd(const Matrix& a) {
  return MatFunPsd(a, PsdFunction::Sqrt());
}

// Orthogonal projector onto range(A) for symmetric PSD A.
Matrix RangeProjector(const Matrix& a, double rank_tol = kRankTol);

Matrix Kron(const Matrix& a, const Matrix& b);
Vector Vec(const Matrix& x);
Matrix Unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols);

// Solves Delta P + P Delta = C for symmetric positive definite P and symmetric
// C, working in P's eigenbasis.
Matrix LyapunovSolve(const Matrix& p, const Matrix& c);

int NumericalRank(const Matrix& a, double tol = kRankTol);

// Orthonormal basis (as columns) of the numerical null space of A. A basis
// with zero columns means the kernel is trivial.
Matrix KernelBasis(const Matrix& a, double tol = kRankTol);

// Orthonormal basis of span(B1) ∩ span(B2); both inputs must have orthonormal
// columns in the same ambient space.
Matrix SubspaceIntersection(const Matrix& b1, const Matrix& b2,
                            double tol = kRankTol);

Matrix Symmetrize(const Matrix& a);

// Spectral norm of a symmetric matrix.
double SymNorm2(const Matrix& a);

bool AllFinite(const Matrix& a);

}  // namespace iflow

#endif  // IFLOW_LINALG_H_
