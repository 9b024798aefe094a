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

#include <sstream>
#include <stdexcept>

#include "iflow/errors.h"
#include "iflow/models.h"

namespace iflow {
namespace {

double IntPow(double x, int k) {
  double out = 1.0;
  for (int i = 0; i < k; ++i) out *= x;
  return out;
}

}  // namespace

MonomialLifting::MonomialLifting(Eigen::MatrixXi exponents)
    : exponents_(std::move(exponents)) {
  if (exponents_.rows() == 0 || exponents_.cols() == 0) {
    throw ShapeError("MonomialLifting: empty exponent matrix");
  }
  for (Eigen::Index l = 0; l < exponents_.cols(); ++l) {
    int shared = 0;
    for (Eigen::Index i = 0; i < exponents_.rows(); ++i) {
      const int a = exponents_(i, l);
      if (a < 0) {
        throw std::invalid_argument("MonomialLifting: negative exponent");
      }
      if (a == 0) continue;
      if (shared == 0) {
        shared = a;
      } else if (a != shared) {
        std::ostringstream os;
        os << "MonomialLifting: column " << l
           << " does not carry a single shared exponent";
        throw std::invalid_argument(os.str());
      }
    }
  }
}

void MonomialLifting::CheckIndex(Eigen::Index i) const {
  if (i < 0 || i >= lifted_dim()) {
    throw std::out_of_range("MonomialLifting: coordinate index out of range");
  }
}

void MonomialLifting::CheckSupport(Eigen::Index i, const Vector& theta) const {
  if (theta.size() != param_dim()) {
    throw ShapeError("MonomialLifting: parameter vector has wrong length");
  }
  for (Eigen::Index l = 0; l < param_dim(); ++l) {
    if (exponents_(i, l) > 0 && theta(l) == 0.0) {
      std::ostringstream os;
      os << "MonomialLifting: theta_" << l << " = 0 inside the support of phi_"
         << i;
      throw NumericalError(os.str());
    }
  }
}

double MonomialLifting::Evaluate(Eigen::Index i, const Vector& theta) const {
  CheckIndex(i);
  if (theta.size() != param_dim()) {
    throw ShapeError("MonomialLifting: parameter vector has wrong length");
  }
  double out = 1.0;
  for (Eigen::Index l = 0; l < param_dim(); ++l) {
    out *= IntPow(theta(l), exponents_(i, l));
  }
  return out;
}

Vector MonomialLifting::Evaluate(const Vector& theta) const {
  Vector out(lifted_dim());
  for (Eigen::Index i = 0; i < lifted_dim(); ++i) out(i) = Evaluate(i, theta);
  return out;
}

MonomialLifting::GradHess MonomialLifting::GradientHessian(
    Eigen::Index i, const Vector& theta) const {
  CheckIndex(i);
  CheckSupport(i, theta);
  const double phi = Evaluate(i, theta);
  const Eigen::Index d = param_dim();
  GradHess out{Vector::Zero(d), Matrix::Zero(d, d)};
  for (Eigen::Index l = 0; l < d; ++l) {
    const int al = exponents_(i, l);
    if (al == 0) continue;
    out.gradient(l) = al * phi / theta(l);
    for (Eigen::Index k = 0; k < d; ++k) {
      const int ak = exponents_(i, k);
      if (ak == 0) continue;
      out.hessian(l, k) = k == l
                              ? al * (al - 1) * phi / (theta(l) * theta(l))
                              : al * ak * phi / (theta(l) * theta(k));
    }
  }
  return out;
}

Vector MonomialLifting::Gradient(Eigen::Index i, const Vector& theta) const {
  return GradientHessian(i, theta).gradient;
}

MonomialLifting AsMonomial(const Parametrization& p) {
  auto alpha = p.MonomialExponents();
  if (!alpha) {
    throw std::invalid_argument("AsMonomial: " + p.kind() +
                                " coordinates are not single monomials");
  }
  return MonomialLifting(std::move(*alpha));
}

}  // namespace iflow
