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

#include <gtest/gtest.h>

#include <cmath>

#include "iflow/errors.h"
#include "iflow/random.h"

namespace iflow {
namespace {

TEST(SymEig, IdentityHasUnitSpectrum) {
  const Spectrum s = SymEig(Matrix::Identity(3, 3));
  EXPECT_TRUE(s.eigenvalues.isApprox(Vector::Ones(3)));
}

TEST(SymEig, DiagonalSortsAscending) {
  Matrix a(2, 2);
  a << 3, 0, 0, 1;
  const Spectrum s = SymEig(a);
  EXPECT_DOUBLE_EQ(s.eigenvalues(0), 1.0);
  EXPECT_DOUBLE_EQ(s.eigenvalues(1), 3.0);
  EXPECT_NEAR(std::abs(s.eigenvectors(1, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(s.eigenvectors(0, 1)), 1.0, 1e-15);
}

TEST(SymEig, ReconstructsRandomSymmetric) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = rng.SymmetricMatrix(5);
    const Spectrum s = SymEig(a);
    EXPECT_LE((s.Reconstruct() - a).norm(), 1e-10 * a.norm());
    EXPECT_LE((s.eigenvectors.transpose() * s.eigenvectors -
               Matrix::Identity(5, 5))
                  .norm(),
              1e-12 * 5);
  }
}

TEST(SymEig, RejectsBadInput) {
  EXPECT_THROW(SymEig(Matrix::Zero(2, 3)), ShapeError);
  Matrix a = Matrix::Identity(2, 2);
  a(0, 1) = a(1, 0) = std::nan("");
  EXPECT_THROW(SymEig(a), NumericalError);
}

TEST(MatFunPsd, SqrtOfDiagonal) {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << 4, 9;
  Matrix expected = Matrix::Zero(2, 2);
  expected.diagonal() << 2, 3;
  EXPECT_LE((SqrtPsd(a) - expected).norm(), 1e-14);
}

TEST(MatFunPsd, PowOfIdentity) {
  const Matrix r = MatFunPsd(Matrix::Identity(2, 2), PsdFunction::Pow(0.37));
  EXPECT_LE((r - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(MatFunPsd, SqrtSquaresBackOnRankDeficient) {
  Rng rng(2);
  const Matrix b = rng.NormalMatrix(3, 2);
  const Matrix a = b * b.transpose();
  const Matrix r = SqrtPsd(a);
  EXPECT_LE((r * r - a).norm(), 1e-10);
}

TEST(MatFunPsd, SqrtSquaresBackOnRandomPsd) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 8;
    const Matrix b = rng.NormalMatrix(n, 1 + trial % 5);
    const Matrix a = b * b.transpose();
    const Matrix r = SqrtPsd(a);
    EXPECT_LE((r * r - a).norm(), 1e-9 * a.norm());
    EXPECT_EQ((r - r.transpose()).norm(), 0.0);
  }
}

TEST(MatFunPsd, LogOfExp) {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << std::exp(1.0), std::exp(-2.0);
  const Matrix l = MatFunPsd(a, PsdFunction::Log());
  EXPECT_NEAR(l(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(l(1, 1), -2.0, 1e-14);
}

TEST(MatFunPsd, RejectsIndefinite) {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << 1, -0.5;
  EXPECT_THROW(SqrtPsd(a), NumericalError);
  Matrix b = Matrix::Zero(2, 2);
  b.diagonal() << 1, 0;
  EXPECT_THROW(MatFunPsd(b, PsdFunction::Log()), NumericalError);
}

TEST(MatFunPsd, ClampsRoundoffNegatives) {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << 1, -1e-14;
  const Matrix r = SqrtPsd(a);
  EXPECT_EQ(r(1, 1), 0.0);
}

TEST(RangeProjector, Basics) {
  EXPECT_LE((RangeProjector(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3))
                .norm(),
            1e-15);
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1;
  EXPECT_LE((RangeProjector(a) - a).norm(), 1e-15);
}

TEST(RangeProjector, RankTwoFromFactor) {
  Rng rng(4);
  const Matrix b = rng.NormalMatrix(4, 2);
  const Matrix a = b * b.transpose();
  const Matrix p = RangeProjector(a);
  EXPECT_NEAR(p.trace(), 2.0, 1e-12);
  EXPECT_LE((p * p - p).norm(), 1e-12);
  EXPECT_LE((p * a - a).norm(), 1e-10 * a.norm());
  EXPECT_LE((p * a - a * p).norm(), 1e-10 * a.norm());
}

TEST(Kron, IdentityAndVec) {
  EXPECT_EQ(Kron(Matrix::Identity(2, 2), Matrix::Identity(3, 3)),
            Matrix::Identity(6, 6));
  Matrix x(2, 2);
  x << 1, 3, 2, 4;
  Vector expected(4);
  expected << 1, 2, 3, 4;
  EXPECT_EQ(Vec(x), expected);
  EXPECT_EQ(Unvec(expected, 2, 2), x);
  EXPECT_THROW(Unvec(expected, 3, 2), ShapeError);
}

TEST(Kron, VecIdentityOnRandomTriples) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix s = rng.NormalMatrix(2, 2);
    const Matrix x = rng.NormalMatrix(2, 3);
    const Matrix t = rng.NormalMatrix(3, 3);
    EXPECT_LE((Kron(t.transpose(), s) * Vec(x) - Vec(s * x * t)).norm(),
              1e-12 * (1.0 + Vec(s * x * t).norm()));
  }
}

TEST(LyapunovSolve, IdentityHalves) {
  Rng rng(6);
  const Matrix c = rng.SymmetricMatrix(3);
  EXPECT_LE((LyapunovSolve(Matrix::Identity(3, 3), c) - c / 2).norm(), 1e-14);
}

TEST(LyapunovSolve, DiagonalExample) {
  Matrix p = Matrix::Zero(2, 2);
  p.diagonal() << 1, 3;
  Matrix c(2, 2);
  c << 0, 4, 4, 0;
  Matrix expected(2, 2);
  expected << 0, 1, 1, 0;
  EXPECT_LE((LyapunovSolve(p, c) - expected).norm(), 1e-14);
}

TEST(LyapunovSolve, ResidualOnRandomSpd) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix b = rng.NormalMatrix(5, 5);
    const Matrix p = b * b.transpose() + 0.1 * Matrix::Identity(5, 5);
    const Matrix c = rng.SymmetricMatrix(5);
    const Matrix d = LyapunovSolve(p, c);
    EXPECT_LE((d * p + p * d - c).norm(), 1e-10 * c.norm());
    EXPECT_LE((d - d.transpose()).norm(), 1e-14 * d.norm());
  }
}

TEST(LyapunovSolve, RejectsSingular) {
  Matrix p = Matrix::Zero(2, 2);
  p(0, 0) = 1;
  EXPECT_THROW(LyapunovSolve(p, Matrix::Identity(2, 2)), NumericalError);
}

TEST(KernelBasis, Examples) {
  EXPECT_EQ(KernelBasis(Matrix::Zero(3, 4)).cols(), 4);
  EXPECT_EQ(KernelBasis(Matrix::Identity(3, 3)).cols(), 0);
  const Matrix k = KernelBasis(Matrix::Ones(2, 2));
  ASSERT_EQ(k.cols(), 1);
  EXPECT_NEAR(std::abs(k(0, 0)), 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(k(0, 0), -k(1, 0), 1e-14);
}

TEST(KernelBasis, AnnihilatesAndIsOrthonormal) {
  Rng rng(8);
  const Matrix a = rng.NormalMatrix(3, 7);
  const Matrix k = KernelBasis(a);
  ASSERT_EQ(k.cols(), 4);
  EXPECT_LE((a * k).norm(), 1e-12 * a.norm());
  EXPECT_LE((k.transpose() * k - Matrix::Identity(4, 4)).norm(), 1e-12);
}

TEST(SubspaceIntersection, Examples) {
  const Matrix e1 = Matrix::Identity(3, 3).col(0);
  const Matrix e2 = Matrix::Identity(3, 3).col(1);
  const Matrix same = SubspaceIntersection(e1, e1);
  ASSERT_EQ(same.cols(), 1);
  EXPECT_NEAR(std::abs(same(0, 0)), 1.0, 1e-14);
  EXPECT_EQ(SubspaceIntersection(e1, e2).cols(), 0);
  EXPECT_THROW(SubspaceIntersection(e1, Matrix::Identity(4, 4).col(0)),
               ShapeError);
}

TEST(SubspaceIntersection, DimensionCount) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix b1 = rng.Orthonormal(5, 3);
    const Matrix b2 = rng.Orthonormal(5, 3);
    const Matrix both = SubspaceIntersection(b1, b2);
    ASSERT_EQ(both.cols(), 1);
    const Vector v = both.col(0);
    EXPECT_LE((b1 * (b1.transpose() * v) - v).norm(), 1e-10);
    EXPECT_LE((b2 * (b2.transpose() * v) - v).norm(), 1e-10);
  }
}

TEST(NumericalRank, UsesRelativeThreshold) {
  Matrix a = Matrix::Zero(3, 3);
  a.diagonal() << 1.0, 1e-3, 1e-14;
  EXPECT_EQ(NumericalRank(a), 2);
  EXPECT_EQ(NumericalRank(Matrix::Zero(2, 2)), 0);
}

}  // namespace
}  // namespace iflow
