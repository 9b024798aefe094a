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

#include "iflow/criteria.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "iflow/errors.h"

namespace iflow {
namespace {

// Vector field whose components are Laurent polynomials in theta with
// integer exponents.
class PolyField {
 public:
  using Poly = std::map<std::vector<int>, double>;

  explicit PolyField(Eigen::Index dim) : comps_(dim) {}

  static PolyField MonomialGradient(const Eigen::MatrixXi& alpha,
                                    Eigen::Index i) {
    const Eigen::Index dim = alpha.cols();
    PolyField out(dim);
    std::vector<int> e(dim);
    for (Eigen::Index l = 0; l < dim; ++l) e[l] = alpha(i, l);
    for (Eigen::Index l = 0; l < dim; ++l) {
      if (e[l] == 0) continue;
      std::vector<int> el = e;
      --el[l];
      out.comps_[l][el] += e[l];
    }
    return out;
  }

  // [X, Y] = dY X - dX Y.
  static PolyField Bracket(const PolyField& x, const PolyField& y) {
    const Eigen::Index dim = static_cast<Eigen::Index>(x.comps_.size());
    PolyField out(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      for (Eigen::Index l = 0; l < dim; ++l) {
        AddProduct(out.comps_[k], Derivative(y.comps_[k], l), x.comps_[l], 1.0);
        AddProduct(out.comps_[k], Derivative(x.comps_[k], l), y.comps_[l],
                   -1.0);
      }
    }
    for (Poly& p : out.comps_) Prune(p);
    return out;
  }

  bool IsZero() const {
    for (const Poly& p : comps_) {
      if (!p.empty()) return false;
    }
    return true;
  }

  Vector Evaluate(const Vector& theta) const {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(comps_.size()));
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      for (const auto& [e, c] : comps_[k]) {
        double term = c;
        for (std::size_t l = 0; l < e.size(); ++l) {
          if (e[l] != 0) term *= std::pow(theta(l), e[l]);
        }
        out(k) += term;
      }
    }
    return out;
  }

 private:
  static Poly Derivative(const Poly& p, Eigen::Index l) {
    Poly out;
    for (const auto& [e, c] : p) {
      if (e[l] == 0) continue;
      std::vector<int> el = e;
      --el[l];
      out[el] += c * e[l];
    }
    return out;
  }

  static void AddProduct(Poly& acc, const Poly& a, const Poly& b, double s) {
    for (const auto& [ea, ca] : a) {
      for (const auto& [eb, cb] : b) {
        std::vector<int> e(ea.size());
        for (std::size_t l = 0; l < e.size(); ++l) e[l] = ea[l] + eb[l];
        acc[e] += s * ca * cb;
      }
    }
  }

  static void Prune(Poly& p) {
    for (auto it = p.begin(); it != p.end();) {
      it = it->second == 0.0 ? p.erase(it) : std::next(it);
    }
  }

  std::vector<Poly> comps_;
};

void RequireNonzero(const Vector& theta, const char* what) {
  for (Eigen::Index l = 0; l < theta.size(); ++l) {
    if (theta(l) == 0.0) {
      std::ostringstream os;
      os << what << ": theta_" << l << " = 0";
      throw NumericalError(os.str());
    }
  }
}

int RankOfColumns(const std::vector<Vector>& cols, Eigen::Index dim,
                  double tol) {
  if (cols.empty()) return 0;
  Matrix m(dim, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) m.col(c) = cols[c];
  return NumericalRank(m, tol);
}

}  // namespace

CriterionReport KernelInclusionCheck(const Parametrization& model,
                                     const LawFamily& laws,
                                     const Vector& theta, double tol) {
  CriterionReport out;
  const Matrix ker_phi = KernelBasis(model.Jacobian(theta));
  const Matrix ker_h = KernelBasis(laws.Jacobian(theta));
  const Matrix both = SubspaceIntersection(ker_phi, ker_h);
  out.dim_ker_phi = static_cast<int>(ker_phi.cols());
  out.dim_ker_h = static_cast<int>(ker_h.cols());
  out.dim_intersection = static_cast<int>(both.cols());
  const double tnorm = theta.norm();
  out.scale = tnorm > 0.0 ? model.Metric(theta).norm() / tnorm : 0.0;
  for (Eigen::Index c = 0; c < both.cols(); ++c) {
    const double dm = model.MetricDirectional(theta, both.col(c)).norm();
    out.worst_dm_norm = std::max(out.worst_dm_norm, dm);
  }
  out.intersection_trivial = out.dim_intersection == 0;
  out.inclusion_holds = out.worst_dm_norm <= tol * out.scale;
  return out;
}

Counterexample CounterexampleDirection(const Matrix& u, const Matrix& v) {
  const Eigen::Index n = u.rows();
  const Eigen::Index m = v.rows();
  const Eigen::Index r = u.cols();
  if (v.cols() != r || r < 2) {
    throw ShapeError(
        "CounterexampleDirection: U and V need the same width r >= 2");
  }
  if (NumericalRank(u) != std::min(n, r) ||
      NumericalRank(v) != std::min(m, r)) {
    throw NumericalError("CounterexampleDirection: U or V is rank deficient");
  }
  const Matrix a = u.transpose() * u;
  const Matrix b = v.transpose() * v;
  const Matrix s = a - b;
  const Spectrum spec = SymEig(s);
  const double snorm = spec.eigenvalues.cwiseAbs().maxCoeff();
  const double gap = spec.eigenvalues(r - 1) - spec.eigenvalues(0);
  if (!(gap > 1e-8 * snorm)) {
    throw NumericalError(
        "CounterexampleDirection: S is proportional to the identity (relaxed "
        "balanced), no counterexample exists");
  }
  const Vector x = spec.eigenvectors.col(r - 1);
  const Vector y = spec.eigenvectors.col(0);
  const Matrix delta_a = x * y.transpose() - y * x.transpose();
  const Matrix comm = delta_a * s - s * delta_a;
  const Matrix delta_s = LyapunovSolve(a + b, comm);

  Counterexample out;
  out.delta = delta_s + delta_a;
  out.h = u * out.delta;
  out.k = -v * out.delta.transpose();

  const LinearChain chain({m, r, n});
  out.theta = chain.Pack({v.transpose(), u});
  out.direction = chain.Pack({out.k.transpose(), out.h});
  const LawFamily laws = LawsFor(chain);
  const Matrix jphi = chain.Jacobian(out.theta);
  const Matrix jh = laws.Jacobian(out.theta);
  const double vnorm = out.direction.norm();
  out.dphi_norm = (jphi * out.direction).norm();
  out.dh_norm = (jh * out.direction).norm();
  out.dm_norm = chain.MetricDirectional(out.theta, out.direction).norm();
  out.phi_scale = vnorm * jphi.norm();
  out.h_scale = vnorm * jh.norm();
  out.m_scale = vnorm * chain.Metric(out.theta).norm() / out.theta.norm();
  return out;
}

Vector LieBracket(const MonomialLifting& ml, Eigen::Index i, Eigen::Index j,
                  const Vector& theta) {
  const auto gi = ml.GradientHessian(i, theta);
  const auto gj = ml.GradientHessian(j, theta);
  return gj.hessian * gi.gradient - gi.hessian * gj.gradient;
}

FrobeniusResult FrobeniusCheck(const MonomialLifting& ml, const Vector& theta,
                               int depth, double tol) {
  if (depth < 1) {
    throw std::invalid_argument("FrobeniusCheck: depth must be at least 1");
  }
  if (theta.size() != ml.param_dim()) {
    throw ShapeError("FrobeniusCheck: parameter vector has wrong length");
  }
  RequireNonzero(theta, "FrobeniusCheck");
  const Eigen::Index d = ml.lifted_dim();
  const Eigen::Index dim = ml.param_dim();
  std::vector<Vector> span;
  for (Eigen::Index i = 0; i < d; ++i) span.push_back(ml.Gradient(i, theta));
  FrobeniusResult out;
  out.dim_span = RankOfColumns(span, dim, tol);

  std::vector<Vector> all = span;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      all.push_back(LieBracket(ml, i, j, theta));
    }
  }
  if (depth > 1) {
    std::vector<PolyField> base;
    for (Eigen::Index i = 0; i < d; ++i) {
      base.push_back(PolyField::MonomialGradient(ml.exponents(), i));
    }
    std::vector<PolyField> gen;
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = i + 1; j < d; ++j) {
        PolyField f = PolyField::Bracket(base[i], base[j]);
        if (!f.IsZero()) gen.push_back(std::move(f));
      }
    }
    for (int g = 2; g <= depth; ++g) {
      std::vector<PolyField> next;
      for (const PolyField& f : gen) {
        for (const PolyField& b : base) {
          PolyField nf = PolyField::Bracket(f, b);
          if (nf.IsZero()) continue;
          all.push_back(nf.Evaluate(theta));
          next.push_back(std::move(nf));
        }
      }
      gen = std::move(next);
    }
  }
  out.dim_span_with_brackets = RankOfColumns(all, dim, tol);
  out.holds = out.dim_span_with_brackets == out.dim_span;
  return out;
}

}  // namespace iflow
