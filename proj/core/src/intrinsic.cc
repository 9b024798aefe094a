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

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "iflow/errors.h"
#include "iflow/flows.h"

namespace iflow {
namespace {

// Positive root of x^2 - l x - c = 0 for c > 0, without cancellation.
double PositiveRoot(double l, double c) {
  const double disc = std::sqrt(l * l + 4.0 * c);
  return l >= 0.0 ? 0.5 * (l + disc) : 2.0 * c / (disc - l);
}

double RankThreshold(const Spectrum& s) {
  const double top = s.eigenvalues.size() ? s.eigenvalues.cwiseAbs().maxCoeff()
                                          : 0.0;
  return kRankTol * top * static_cast<double>(s.eigenvalues.size());
}

Matrix TwoLayerFactor(const Spectrum& s, double shift) {
  const double thr = RankThreshold(s);
  const double lam = 2.0 * shift;
  return s.Apply([thr, lam](double e) {
    return e > thr ? PositiveRoot(lam, e) : 0.0;
  });
}

double PolyDerivative(const Vector& roots, double x) {
  double out = 0.0;
  for (Eigen::Index k = 0; k < roots.size(); ++k) {
    double term = 1.0;
    for (Eigen::Index j = 0; j < roots.size(); ++j) {
      if (j != k) term *= x - roots(j);
    }
    out += term;
  }
  return out;
}

double RecoverScalar(double e, const Vector& roots) {
  double lo = 0.0;
  if (roots.size()) lo = std::max(lo, roots.maxCoeff());
  if (RootPolynomial(roots, lo) > e) {
    throw NumericalError("RecoverGram: no root above the largest polynomial root");
  }
  double width = 1.0;
  double hi = lo + width;
  while (RootPolynomial(roots, hi) < e) {
    width *= 2.0;
    hi = lo + width;
    if (!std::isfinite(hi)) throw NumericalError("RecoverGram: bracket overflow");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (RootPolynomial(roots, mid) < e) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double d = PolyDerivative(roots, x);
    if (!(d > 0.0)) break;
    const double next = x - (RootPolynomial(roots, x) - e) / d;
    if (!(next >= lo && next <= hi)) break;
    x = next;
  }
  return x;
}

Vector RecoverEigenvalues(const Spectrum& s, const Vector& roots) {
  const double top =
      s.eigenvalues.size() ? s.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  Vector out(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
    const double e = s.eigenvalues(i);
    if (e < -1e-12 * std::max(1.0, top)) {
      std::ostringstream os;
      os << "RecoverGram: eigenvalue " << e << " is negative";
      throw NumericalError(os.str());
    }
    out(i) = RecoverScalar(std::max(e, 0.0), roots);
  }
  return out;
}

Matrix InBasis(const Spectrum& s, const Vector& values) {
  return Symmetrize(s.eigenvectors * values.asDiagonal() *
                    s.eigenvectors.transpose());
}

Vector PartialProducts(const Vector& roots, const Vector& x, int count) {
  Vector out = Vector::Ones(x.size());
  for (int k = 0; k < count; ++k) {
    out = out.cwiseProduct((x.array() - roots(k)).matrix());
  }
  return out;
}

}  // namespace

// -------------------------------------------------------------- two layer --

TwoLayerGrams TwoLayerGram(const Matrix& z, double lambda) {
  return {TwoLayerFactor(SymEig(z * z.transpose()), 0.5 * lambda),
          TwoLayerFactor(SymEig(z.transpose() * z), -0.5 * lambda)};
}

Matrix TwoLayerRhs(const Matrix& z, double lambda, const Matrix& g) {
  if (g.rows() != z.rows() || g.cols() != z.cols()) {
    throw ShapeError("TwoLayerRhs: gradient shape differs from Z");
  }
  const TwoLayerGrams grams = TwoLayerGram(z, lambda);
  return -grams.outer * g - g * grams.inner;
}

Matrix TwoLayerMetric(const Matrix& z, double lambda) {
  const TwoLayerGrams grams = TwoLayerGram(z, lambda);
  return Kron(Matrix::Identity(z.cols(), z.cols()), grams.outer) +
         Kron(grams.inner, Matrix::Identity(z.rows(), z.rows()));
}

IntrinsicRhs TwoLayerIntrinsic(double lambda) {
  return [lambda](const Matrix& z, const Matrix& g) {
    return TwoLayerRhs(z, lambda, g);
  };
}

// ------------------------------------------------------------ three layer --

AlphaBeta SolveAlphaBeta(const Matrix& zsq, const Vector& lambda,
                         const Vector& mu, const AlphaBetaOptions& opts) {
  const Eigen::Index n = zsq.rows();
  const Eigen::Index m = zsq.cols();
  if (lambda.size() != n || mu.size() != m) {
    throw ShapeError("SolveAlphaBeta: lambda / mu sizes do not match Zsq");
  }
  if (!(zsq.minCoeff() > 0.0) || !AllFinite(zsq)) {
    throw NumericalError("SolveAlphaBeta: |Z|^2 must be strictly positive");
  }
  AlphaBeta out;
  out.alpha = opts.alpha_start.size() ? opts.alpha_start : Vector::Ones(n);
  out.beta = opts.beta_start.size() ? opts.beta_start : Vector::Ones(m);
  out.start =
      opts.alpha_start.size() || opts.beta_start.size() ? "custom" : "ones";
  if (out.alpha.size() != n || out.beta.size() != m ||
      !(out.alpha.minCoeff() > 0.0) || !(out.beta.minCoeff() > 0.0)) {
    throw std::invalid_argument("SolveAlphaBeta: invalid start");
  }
  double prev = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Vector ca = zsq * out.beta.cwiseInverse();
    Vector a(n);
    for (Eigen::Index i = 0; i < n; ++i) a(i) = PositiveRoot(lambda(i), ca(i));
    const Vector cb = zsq.transpose() * a.cwiseInverse();
    Vector b(m);
    for (Eigen::Index j = 0; j < m; ++j) b(j) = PositiveRoot(mu(j), cb(j));
    double dist = std::max(
        (a.array() / out.alpha.array()).log().abs().maxCoeff(),
        (b.array() / out.beta.array()).log().abs().maxCoeff());
    if (dist > prev) {
      a = (a.array() * out.alpha.array()).sqrt().matrix();
      b = (b.array() * out.beta.array()).sqrt().matrix();
      out.damped = true;
    }
    if (!(a.minCoeff() > 0.0) || !(b.minCoeff() > 0.0) || !a.allFinite() ||
        !b.allFinite()) {
      throw NumericalError("SolveAlphaBeta: nonpositive iterate");
    }
    out.alpha = a;
    out.beta = b;
    out.iterations = it;
    if (dist < opts.tol) {
      converged = true;
      break;
    }
    prev = dist;
  }
  if (!converged) {
    std::ostringstream os;
    os << "SolveAlphaBeta: no convergence after " << opts.max_iter
       << " iterations";
    throw NumericalError(os.str());
  }
  const Vector ca = zsq * out.beta.cwiseInverse();
  const Vector cb = zsq.transpose() * out.alpha.cwiseInverse();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = out.alpha(i);
    const double r = std::abs(x * x - lambda(i) * x - ca(i)) /
                     (x * x + std::abs(lambda(i)) * x + ca(i));
    out.residual = std::max(out.residual, r);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    const double x = out.beta(j);
    const double r = std::abs(x * x - mu(j) * x - cb(j)) /
                     (x * x + std::abs(mu(j)) * x + cb(j));
    out.residual = std::max(out.residual, r);
  }
  return out;
}

Matrix ThreeLayerRhs(const Matrix& z, const Vector& lambda, const Vector& mu,
                     const Matrix& g) {
  if (g.rows() != z.rows() || g.cols() != z.cols()) {
    throw ShapeError("ThreeLayerRhs: gradient shape differs from Z");
  }
  if (!(z.cwiseAbs().minCoeff() > 0.0)) {
    throw NumericalError("ThreeLayerRhs: Z has a zero entry");
  }
  const AlphaBeta ab = SolveAlphaBeta(z.cwiseProduct(z), lambda, mu);
  const Vector row = (g * z.transpose()).diagonal().cwiseQuotient(ab.alpha);
  const Vector col = (z.transpose() * g).diagonal().cwiseQuotient(ab.beta);
  return -(row.asDiagonal() * z) -
         ab.alpha.asDiagonal() * g * ab.beta.asDiagonal() -
         z * col.asDiagonal();
}

IntrinsicRhs ThreeLayerIntrinsic(const Vector& lambda, const Vector& mu) {
  return [lambda, mu](const Matrix& z, const Matrix& g) {
    return ThreeLayerRhs(z, lambda, mu, g);
  };
}

// ------------------------------------------------------------ deep linear --

PolySpec MakePolySpec(const Vector& lambda) {
  const int l = static_cast<int>(lambda.size()) + 1;
  PolySpec out;
  out.depth = l;
  out.a = Vector::Zero(l);
  out.b = Vector::Zero(l);
  for (int k = 1; k < l; ++k) {
    out.a(k) = out.a(k - 1) + lambda(l - 1 - k);
    out.b(k) = out.b(k - 1) - lambda(k - 1);
  }
  return out;
}

double RootPolynomial(const Vector& roots, double x) {
  double out = 1.0;
  for (Eigen::Index k = 0; k < roots.size(); ++k) out *= x - roots(k);
  return out;
}

Matrix RootPolynomial(const Vector& roots, const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw ShapeError("RootPolynomial: matrix must be square");
  }
  const Matrix eye = Matrix::Identity(a.rows(), a.cols());
  Matrix out = eye;
  for (Eigen::Index k = 0; k < roots.size(); ++k) {
    out = out * (a - roots(k) * eye);
  }
  return out;
}

Matrix RecoverGram(const Matrix& e, const Vector& roots) {
  const Spectrum s = SymEig(e);
  return InBasis(s, RecoverEigenvalues(s, roots));
}

Matrix DeepLinearRhs(const Matrix& z, const Vector& lambda, const Matrix& g) {
  if (z.rows() != z.cols()) {
    throw ShapeError("DeepLinearRhs: Z must be square");
  }
  if (g.rows() != z.rows() || g.cols() != z.cols()) {
    throw ShapeError("DeepLinearRhs: gradient shape differs from Z");
  }
  const PolySpec spec = MakePolySpec(lambda);
  const int l = spec.depth;
  const Spectrum outer = SymEig(z * z.transpose());
  const Spectrum inner = SymEig(z.transpose() * z);
  const Vector p = RecoverEigenvalues(outer, spec.a);
  const Vector q = RecoverEigenvalues(inner, spec.b);
  Matrix out = Matrix::Zero(z.rows(), z.cols());
  for (int j = 1; j <= l; ++j) {
    const Matrix s_j = InBasis(outer, PartialProducts(spec.a, p, l - j));
    const Matrix t_j = InBasis(inner, PartialProducts(spec.b, q, j - 1));
    out -= s_j * g * t_j;
  }
  return out;
}

IntrinsicRhs DeepLinearIntrinsic(const Vector& lambda) {
  return [lambda](const Matrix& z, const Matrix& g) {
    return DeepLinearRhs(z, lambda, g);
  };
}

}  // namespace iflow
