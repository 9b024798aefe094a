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

#include "iflow/linalg.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "iflow/errors.h"

namespace iflow {
namespace {

void RequireSquare(const Matrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << a.rows()
       << "x" << a.cols();
    throw ShapeError(os.str());
  }
}

double ClampThreshold(const Spectrum& s, double clamp_tol) {
  const double norm = s.eigenvalues.size() == 0
                          ? 0.0
                          : s.eigenvalues.cwiseAbs().maxCoeff();
  return clamp_tol * norm;
}

}  // namespace

Matrix Spectrum::Apply(const std::function<double(double)>& f) const {
  Vector mapped(eigenvalues.size());
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    mapped(i) = f(eigenvalues(i));
  }
  Matrix out = eigenvectors * mapped.asDiagonal() * eigenvectors.transpose();
  return Symmetrize(out);
}

Matrix Spectrum::Reconstruct() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

Spectrum SymEig(const Matrix& a) {
  RequireSquare(a, "SymEig");
  if (!AllFinite(a)) throw NumericalError("SymEig: non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(Symmetrize(a));
  if (solver.info() != Eigen::Success) {
    throw NumericalError("SymEig: eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix MatFunPsd(const Matrix& a, PsdFunction f, double clamp_tol) {
  return MatFunPsd(SymEig(a), f, clamp_tol);
}

Matrix MatFunPsd(const Spectrum& spectrum, PsdFunction f, double clamp_tol) {
  const double threshold = ClampThreshold(spectrum, clamp_tol);
  const double lowest = spectrum.eigenvalues.size() > 0
                            ? spectrum.eigenvalues.minCoeff()
                            : 0.0;
  if (f.kind == PsdFunctionKind::kLog) {
    if (lowest <= clamp_tol) {
      std::ostringstream os;
      os << "MatFunPsd(log): eigenvalue " << lowest << " not above "
         << clamp_tol;
      throw NumericalError(os.str());
    }
    return spectrum.Apply([](double x) { return std::log(x); });
  }
  if (lowest < -threshold) {
    std::ostringstream os;
    os << "MatFunPsd: matrix is not PSD (eigenvalue " << lowest
       << ", clamp window " << threshold << ")";
    throw NumericalError(os.str());
  }
  if (f.kind == PsdFunctionKind::kSqrt) {
    return spectrum.Apply(
        [](double x) { return std::sqrt(std::max(x, 0.0)); });
  }
  const double s = f.exponent;
  return spectrum.Apply(
      [s](double x) { return std::pow(std::max(x, 0.0), s); });
}

Matrix RangeProjector(const Matrix& a, double rank_tol) {
  const Spectrum s = SymEig(a);
  const double top = s.eigenvalues.cwiseAbs().maxCoeff();
  const double threshold =
      rank_tol * top * static_cast<double>(a.rows());
  Matrix basis(a.rows(), 0);
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
    if (top > 0.0 && s.eigenvalues(i) > threshold) {
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = s.eigenvectors.col(i);
    }
  }
  return Symmetrize(basis * basis.transpose());
}

Matrix Kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Vector Vec(const Matrix& x) {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

Matrix Unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 0 || cols < 0 || rows * cols != v.size()) {
    std::ostringstream os;
    os << "Unvec: cannot view length " << v.size() << " as " << rows << "x"
       << cols;
    throw ShapeError(os.str());
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Matrix LyapunovSolve(const Matrix& p, const Matrix& c) {
  RequireSquare(p, "LyapunovSolve");
  if (c.rows() != p.rows() || c.cols() != p.cols()) {
    throw ShapeError("LyapunovSolve: P and C shapes differ");
  }
  const Spectrum s = SymEig(p);
  const double norm = s.eigenvalues.cwiseAbs().maxCoeff();
  if (s.eigenvalues.minCoeff() < 1e-10 * norm || norm == 0.0) {
    throw NumericalError("LyapunovSolve: P is not positive definite");
  }
  const Matrix& q = s.eigenvectors;
  Matrix rotated = q.transpose() * Symmetrize(c) * q;
  for (Eigen::Index i = 0; i < rotated.rows(); ++i) {
    for (Eigen::Index j = 0; j < rotated.cols(); ++j) {
      rotated(i, j) /= s.eigenvalues(i) + s.eigenvalues(j);
    }
  }
  return Symmetrize(q * rotated * q.transpose());
}

namespace {

struct SvdParts {
  Vector singular_values;
  Matrix v;
  double threshold = 0.0;
};

SvdParts FullSvd(const Matrix& a, double tol) {
  SvdParts parts;
  if (a.rows() == 0) {
    parts.singular_values = Vector(0);
    parts.v = Matrix::Identity(a.cols(), a.cols());
    return parts;
  }
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  parts.singular_values = svd.singularValues();
  parts.v = svd.matrixV();
  const double top = parts.singular_values.size() > 0
                         ? parts.singular_values(0)
                         : 0.0;
  parts.threshold =
      tol * top * static_cast<double>(std::max(a.rows(), a.cols()));
  return parts;
}

int RankFromParts(const SvdParts& parts) {
  int rank = 0;
  for (Eigen::Index i = 0; i < parts.singular_values.size(); ++i) {
    if (parts.singular_values(i) > parts.threshold &&
        parts.singular_values(i) > 0.0) {
      ++rank;
    }
  }
  return rank;
}

}  // namespace

int NumericalRank(const Matrix& a, double tol) {
  if (a.size() == 0) return 0;
  if (!AllFinite(a)) throw NumericalError("NumericalRank: non-finite entries");
  return RankFromParts(FullSvd(a, tol));
}

Matrix KernelBasis(const Matrix& a, double tol) {
  if (!AllFinite(a)) throw NumericalError("KernelBasis: non-finite entries");
  if (a.cols() == 0) return Matrix(0, 0);
  const SvdParts parts = FullSvd(a, tol);
  const int rank = RankFromParts(parts);
  return parts.v.rightCols(a.cols() - rank);
}

Matrix SubspaceIntersection(const Matrix& b1, const Matrix& b2, double tol) {
  if (b1.rows() != b2.rows()) {
    std::ostringstream os;
    os << "SubspaceIntersection: ambient dimensions differ (" << b1.rows()
       << " vs " << b2.rows() << ")";
    throw ShapeError(os.str());
  }
  const Eigen::Index n = b1.rows();
  if (b1.cols() == 0 || b2.cols() == 0) return Matrix(n, 0);
  const Matrix id = Matrix::Identity(n, n);
  Matrix stacked(2 * n, n);
  stacked.topRows(n) = id - b1 * b1.transpose();
  stacked.bottomRows(n) = id - b2 * b2.transpose();
  if (stacked.norm() == 0.0) return Matrix::Identity(n, n);
  return KernelBasis(stacked, tol);
}

Matrix Symmetrize(const Matrix& a) {
  return 0.5 * (a + a.transpose());
}

double SymNorm2(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(Symmetrize(a),
                                               Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

bool AllFinite(const Matrix& a) { return a.allFinite(); }

}  // namespace iflow
