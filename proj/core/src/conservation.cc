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

#include "iflow/conservation.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "iflow/errors.h"
#include "iflow/random.h"

namespace iflow {
namespace {

Vector Concat(const std::vector<Vector>& parts) {
  Eigen::Index total = 0;
  for (const Vector& p : parts) total += p.size();
  Vector out(total);
  Eigen::Index at = 0;
  for (const Vector& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

Eigen::Index TriSize(Eigen::Index n) { return n * (n + 1) / 2; }

LawFamily ChainLaws(const LinearChain& chain) {
  const ParamLayout layout = chain.layout();
  const int l = chain.depth();
  Eigen::Index size = 0;
  for (int i = 1; i < l; ++i) size += TriSize(chain.dims()[i]);
  auto bilinear = [layout, l](const Vector& a, const Vector& b) {
    const auto ua = layout.Unpack(a);
    const auto ub = layout.Unpack(b);
    std::vector<Vector> parts;
    for (int i = 0; i + 1 < l; ++i) {
      parts.push_back(UpperTriangle(ua[i + 1].transpose() * ub[i + 1] -
                                    ua[i] * ub[i].transpose()));
    }
    return Concat(parts);
  };
  return LawFamily("linear_chain", chain.param_dim(), size, bilinear);
}

LawFamily RankOneLaws(const RankOneLift& model) {
  const ParamLayout layout = model.layout();
  auto bilinear = [layout](const Vector& a, const Vector& b) {
    const auto pa = layout.Unpack(a);
    const auto pb = layout.Unpack(b);
    const Vector out =
        (pa[0].cwiseProduct(pb[0]).colwise().sum() -
         pa[1].cwiseProduct(pb[1]).colwise().sum())
            .transpose();
    return out;
  };
  return LawFamily("rank_one", model.param_dim(), model.r(), bilinear);
}

LawFamily DiagPathLaws(const DiagPathLift& model) {
  const ParamLayout layout = model.layout();
  const Eigen::Index n = model.n();
  const Eigen::Index m = model.m();
  auto bilinear = [layout, n, m](const Vector& a, const Vector& b) {
    const auto pa = layout.Unpack(a);
    const auto pb = layout.Unpack(b);
    const Matrix vv = pa[1].cwiseProduct(pb[1]);
    Vector out(n + m);
    out.head(n) = pa[0].cwiseProduct(pb[0]).col(0) - vv.rowwise().sum();
    out.tail(m) =
        pa[2].cwiseProduct(pb[2]).col(0) - vv.colwise().sum().transpose();
    return out;
  };
  return LawFamily("diag_path", model.param_dim(), n + m, bilinear);
}

LawFamily AttentionLaws(const AttentionLift& model) {
  const ParamLayout layout = model.layout();
  auto bilinear = [layout](const Vector& a, const Vector& b) {
    const auto pa = layout.Unpack(a);
    const auto pb = layout.Unpack(b);
    return Concat(
        {UpperTriangle(pa[0] * pb[0].transpose() - pa[1] * pb[1].transpose()),
         UpperTriangle(pa[2] * pb[2].transpose() -
                       pa[3] * pb[3].transpose())});
  };
  return LawFamily("attention", model.param_dim(), 2 * TriSize(model.d1()),
                   bilinear);
}

}  // namespace

LawFamily::LawFamily(std::string name, Eigen::Index param_dim,
                     Eigen::Index size, Bilinear bilinear)
    : name_(std::move(name)),
      param_dim_(param_dim),
      size_(size),
      bilinear_(std::move(bilinear)) {}

void LawFamily::Check(const Vector& theta) const {
  if (theta.size() != param_dim_) {
    std::ostringstream os;
    os << "LawFamily(" << name_ << "): expected " << param_dim_
       << " parameters, got " << theta.size();
    throw ShapeError(os.str());
  }
}

Vector LawFamily::Evaluate(const Vector& theta) const {
  Check(theta);
  return bilinear_(theta, theta);
}

Vector LawFamily::Directional(const Vector& theta, const Vector& v) const {
  Check(theta);
  Check(v);
  return bilinear_(theta, v) + bilinear_(v, theta);
}

Matrix LawFamily::Jacobian(const Vector& theta) const {
  Check(theta);
  Matrix jac(size_, param_dim_);
  Vector e = Vector::Zero(param_dim_);
  for (Eigen::Index k = 0; k < param_dim_; ++k) {
    e(k) = 1.0;
    jac.col(k) = bilinear_(theta, e) + bilinear_(e, theta);
    e(k) = 0.0;
  }
  return jac;
}

Vector UpperTriangle(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Vector out(TriSize(n));
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) out(at++) = a(i, j);
  }
  return out;
}

LawFamily LawsFor(const Parametrization& model) {
  if (auto* p = dynamic_cast<const LinearChain*>(&model)) return ChainLaws(*p);
  if (auto* p = dynamic_cast<const RankOneLift*>(&model)) {
    return RankOneLaws(*p);
  }
  if (auto* p = dynamic_cast<const DiagPathLift*>(&model)) {
    return DiagPathLaws(*p);
  }
  if (auto* p = dynamic_cast<const AttentionLift*>(&model)) {
    return AttentionLaws(*p);
  }
  throw std::invalid_argument("LawsFor: no law family for " + model.kind());
}

BalanceReport Balance(const std::vector<Matrix>& layers) {
  BalanceReport out;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i + 1].cols() != layers[i].rows()) {
      throw ShapeError("Balance: consecutive layers are not compatible");
    }
    const Matrix d = layers[i + 1].transpose() * layers[i + 1] -
                     layers[i] * layers[i].transpose();
    const double lam = d.trace() / static_cast<double>(d.rows());
    const double res =
        (d - lam * Matrix::Identity(d.rows(), d.cols())).norm();
    out.lambda.push_back(lam);
    out.residual.push_back(res);
    out.max_residual = std::max(out.max_residual, res);
  }
  return out;
}

BalanceReport Balance(const LinearChain& chain, const Vector& theta) {
  return Balance(chain.Layers(theta));
}

ParamPoint MakeRelaxedBalanced(const LinearChain& chain,
                               const std::vector<double>& lambda,
                               std::uint64_t seed) {
  const auto& dims = chain.dims();
  const int l = chain.depth();
  if (static_cast<int>(lambda.size()) != l - 1) {
    std::ostringstream os;
    os << "MakeRelaxedBalanced: expected " << l - 1 << " lambda values, got "
       << lambda.size();
    throw ShapeError(os.str());
  }
  Rng rng(seed);
  std::vector<Matrix> u(l);
  u[0] = rng.NormalMatrix(dims[1], dims[0]) /
         std::sqrt(static_cast<double>(dims[0]));
  for (int i = 1; i < l; ++i) {
    if (dims[i + 1] < dims[i]) {
      throw ShapeError("MakeRelaxedBalanced: width shrinks after layer " +
                       std::to_string(i));
    }
    const Matrix g = u[i - 1] * u[i - 1].transpose() +
                     lambda[i - 1] * Matrix::Identity(dims[i], dims[i]);
    const Spectrum spec = SymEig(g);
    if (spec.eigenvalues(0) < -kClampTol * spec.eigenvalues.cwiseAbs().maxCoeff()) {
      std::ostringstream os;
      os << "MakeRelaxedBalanced: lambda_" << i << " = " << lambda[i - 1]
         << " is infeasible (smallest eigenvalue " << spec.eigenvalues(0)
         << ")";
      throw NumericalError(os.str());
    }
    u[i] = rng.Orthonormal(dims[i + 1], dims[i]) *
           MatFunPsd(spec, PsdFunction::Sqrt());
  }
  return chain.Point(chain.Pack(u));
}

ParamPoint MakeRelaxedDiagPath(const DiagPathLift& model,
                               const std::vector<double>& lambda,
                               const std::vector<double>& mu,
                               std::uint64_t seed) {
  const Eigen::Index n = model.n();
  const Eigen::Index m = model.m();
  if (static_cast<Eigen::Index>(lambda.size()) != n ||
      static_cast<Eigen::Index>(mu.size()) != m) {
    throw ShapeError("MakeRelaxedDiagPath: expected n lambda and m mu values");
  }
  Rng rng(seed);
  const Matrix v = rng.NormalMatrix(n, m);
  const Matrix v2 = v.cwiseProduct(v);
  Matrix u(n, 1);
  Matrix w(m, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = v2.row(i).sum() + lambda[i];
    if (s <= 0.0) {
      throw NumericalError("MakeRelaxedDiagPath: lambda_" + std::to_string(i) +
                           " is infeasible");
    }
    u(i, 0) = std::sqrt(s);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    const double s = v2.col(j).sum() + mu[j];
    if (s <= 0.0) {
      throw NumericalError("MakeRelaxedDiagPath: mu_" + std::to_string(j) +
                           " is infeasible");
    }
    w(j, 0) = std::sqrt(s);
  }
  return model.Point(model.layout().Pack({u, v, w}));
}

ParamPoint MakeRandom(const Parametrization& model, double scale,
                      std::uint64_t seed) {
  Rng rng(seed);
  return model.Point(scale * rng.NormalVector(model.param_dim()));
}

double DriftSeries::max_absolute() const {
  return absolute.empty() ? 0.0
                          : *std::max_element(absolute.begin(), absolute.end());
}

double DriftSeries::max_relative() const {
  return relative.empty() ? 0.0
                          : *std::max_element(relative.begin(), relative.end());
}

DriftSeries ConservationDrift(const std::vector<Vector>& trajectory,
                              const LawFamily& laws) {
  if (trajectory.empty()) {
    throw std::invalid_argument("ConservationDrift: empty trajectory");
  }
  const Vector h0 = laws.Evaluate(trajectory.front());
  const double scale = 1.0 + (h0.size() ? h0.cwiseAbs().maxCoeff() : 0.0);
  DriftSeries out;
  for (const Vector& theta : trajectory) {
    const Vector dh = laws.Evaluate(theta) - h0;
    const double a = dh.size() ? dh.cwiseAbs().maxCoeff() : 0.0;
    out.absolute.push_back(a);
    out.relative.push_back(a / scale);
  }
  return out;
}

}  // namespace iflow
