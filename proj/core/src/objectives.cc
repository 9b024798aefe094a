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

#include "iflow/objectives.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "iflow/errors.h"

namespace iflow {

void Objective::CheckPoint(const Vector& z) const {
  if (z.size() != shape_.size() || z.size() == 0) {
    std::ostringstream os;
    os << kind() << ": expected a point of length " << shape_.size()
       << ", got " << z.size();
    throw ShapeError(os.str());
  }
}

QuadraticLoss::QuadraticLoss(Matrix target)
    : Objective({target.rows(), target.cols()}), target_(std::move(target)) {
  if (!AllFinite(target_)) {
    throw NumericalError("QuadraticLoss: non-finite target");
  }
}

double QuadraticLoss::Value(const Vector& z) const {
  CheckPoint(z);
  return 0.5 * (z - Vec(target_)).squaredNorm();
}

Vector QuadraticLoss::Gradient(const Vector& z) const {
  CheckPoint(z);
  return z - Vec(target_);
}

AttentionLoss::AttentionLoss(Matrix tokens, Matrix target)
    : Objective({tokens.cols(), 2 * tokens.cols()}),
      tokens_(std::move(tokens)),
      target_(std::move(target)) {
  if (target_.rows() != tokens_.rows() || target_.cols() != tokens_.cols()) {
    throw ShapeError("AttentionLoss: target must have the shape of the tokens");
  }
  if (!AllFinite(tokens_) || !AllFinite(target_)) {
    throw NumericalError("AttentionLoss: non-finite data");
  }
}

Matrix AttentionLoss::Attention(const Matrix& phi1) const {
  Matrix logits = tokens_ * phi1 * tokens_.transpose();
  if (!AllFinite(logits)) {
    throw NumericalError("AttentionLoss: non-finite softmax input");
  }
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - top).exp().matrix();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

double AttentionLoss::Value(const Vector& z) const {
  CheckPoint(z);
  const Eigen::Index dim = tokens_.cols();
  const Matrix zm = Unvec(z, dim, 2 * dim);
  const Matrix p = Attention(zm.leftCols(dim));
  return 0.5 * (p * tokens_ * zm.rightCols(dim) - target_).squaredNorm();
}

Vector AttentionLoss::Gradient(const Vector& z) const {
  CheckPoint(z);
  const Eigen::Index dim = tokens_.cols();
  const Matrix zm = Unvec(z, dim, 2 * dim);
  const Matrix p = Attention(zm.leftCols(dim));
  const Matrix xv = tokens_ * zm.rightCols(dim);
  const Matrix resid = p * xv - target_;
  const Matrix g_p = resid * xv.transpose();
  Matrix g_logits(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double inner = p.row(i).dot(g_p.row(i));
    g_logits.row(i) =
        p.row(i).cwiseProduct((g_p.row(i).array() - inner).matrix());
  }
  Matrix g(dim, 2 * dim);
  g.leftCols(dim) = tokens_.transpose() * g_logits * tokens_;
  g.rightCols(dim) = tokens_.transpose() * p.transpose() * resid;
  return Vec(g);
}

ObjectivePtr MakeQuadraticLoss(Matrix target) {
  return std::make_shared<const QuadraticLoss>(std::move(target));
}

ObjectivePtr MakeAttentionLoss(Matrix tokens, Matrix target) {
  return std::make_shared<const AttentionLoss>(std::move(tokens),
                                               std::move(target));
}

double GradCheck(const Objective& obj, const Vector& z, double step) {
  if (z.size() == 0) throw ShapeError("GradCheck: empty point");
  if (!(step > 0.0)) throw std::invalid_argument("GradCheck: step must be > 0");
  const Vector g = obj.Gradient(z);
  double worst = 0.0;
  Vector zp = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    zp(i) = z(i) + step;
    const double fp = obj.Value(zp);
    zp(i) = z(i) - step;
    const double fm = obj.Value(zp);
    zp(i) = z(i);
    const double fd = (fp - fm) / (2.0 * step);
    worst = std::max(worst, std::abs(g(i) - fd) / (1.0 + std::abs(g(i))));
  }
  return worst;
}

}  // namespace iflow
