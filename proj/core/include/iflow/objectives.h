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

// Losses f on the lifted variable, so that the training loss factorizes as
// l(theta) = f(phi(theta)).

#ifndef IFLOW_OBJECTIVES_H_
#define IFLOW_OBJECTIVES_H_

#include <memory>
#include <string>

#include "iflow/linalg.h"
#include "iflow/models.h"

namespace iflow {

class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string kind() const = 0;
  const LiftShape& shape() const { return shape_; }

  // Both take z = vec(Z) and throw ShapeError on a length mismatch.
  virtual double Value(const Vector& z) const = 0;
  virtual Vector Gradient(const Vector& z) const = 0;

 protected:
  explicit Objective(LiftShape shape) : shape_(shape) {}
  void CheckPoint(const Vector& z) const;

 private:
  LiftShape shape_;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

// f(Z) = 1/2 |Z - Y|_F^2.
class QuadraticLoss final : public Objective {
 public:
  explicit QuadraticLoss(Matrix target);

  std::string kind() const override { return "quadratic"; }
  const Matrix& target() const { return target_; }
  double Value(const Vector& z) const override;
  Vector Gradient(const Vector& z) const override;

 private:
  Matrix target_;
};

// f(phi1, phi2) = 1/2 |softmax(X phi1 X^T) X phi2 - Y|_F^2 with a row-wise
// softmax. z is vec([phi1 | phi2]), phi1 and phi2 both dim x dim.
class AttentionLoss final : public Objective {
 public:
  AttentionLoss(Matrix tokens, Matrix target);

  std::string kind() const override { return "attention"; }
  double Value(const Vector& z) const override;
  Vector Gradient(const Vector& z) const override;

  // Row-stochastic attention matrix softmax(X phi1 X^T).
  Matrix Attention(const Matrix& phi1) const;

 private:
  Matrix tokens_;
  Matrix target_;
};

ObjectivePtr MakeQuadraticLoss(Matrix target);
ObjectivePtr MakeAttentionLoss(Matrix tokens, Matrix target);

// max_i |g_i - fd_i| / (1 + |g_i|) with central differences of the given step.
double GradCheck(const Objective& obj, const Vector& z, double step = 1e-6);

}  // namespace iflow

#endif  // IFLOW_OBJECTIVES_H_
