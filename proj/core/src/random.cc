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

#include "iflow/random.h"

#include <cmath>

#include "iflow/errors.h"

namespace iflow {

double Rng::Uniform(double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(engine_);
}

Matrix Rng::NormalMatrix(Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  // Fill in column-major order so draws are reproducible given the seed.
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Normal();
  }
  return m;
}

Vector Rng::NormalVector(Eigen::Index size) {
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = Normal();
  return v;
}

Vector Rng::NonzeroVector(Eigen::Index size, double min_abs) {
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    double x = Normal();
    while (std::abs(x) < min_abs) x = Normal();
    v(i) = x;
  }
  return v;
}

Matrix Rng::SymmetricMatrix(Eigen::Index n) {
  const Matrix g = NormalMatrix(n, n);
  return 0.5 * (g + g.transpose());
}

Matrix Rng::Orthonormal(Eigen::Index rows, Eigen::Index cols) {
  if (rows < cols) {
    throw ShapeError("Rng::Orthonormal: need rows >= cols");
  }
  const Matrix g = NormalMatrix(rows, cols);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  // Sign fix makes the distribution Haar rather than QR-convention biased.
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

}  // namespace iflow
