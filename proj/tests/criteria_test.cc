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

#include <gtest/gtest.h>

#include "iflow/errors.h"
#include "iflow/random.h"
#include "test_util.h"

namespace iflow {
namespace {

TEST(KernelInclusion, RankOneTrivialIntersection) {
  const auto model = MakeRankOneLift(2, 2, 2);
  const LawFamily laws = LawsFor(*model);
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector theta = rng.NonzeroVector(model->param_dim());
    const CriterionReport r = KernelInclusionCheck(*model, laws, theta);
    EXPECT_EQ(r.dim_intersection, 0);
    EXPECT_TRUE(r.intersection_trivial);
    EXPECT_TRUE(r.inclusion_holds);
    EXPECT_LE(r.dim_intersection, std::min(r.dim_ker_phi, r.dim_ker_h));
  }
}

TEST(KernelInclusion, BalancedTwoLayerHolds) {
  const auto chain = MakeLinearChain({3, 2, 3});
  const LawFamily laws = LawsFor(*chain);
  const ParamPoint p = MakeRelaxedBalanced(*chain, {0.0}, 2);
  const CriterionReport r = KernelInclusionCheck(*chain, laws, p.flat);
  EXPECT_EQ(r.dim_intersection, 1);
  EXPECT_LE(r.worst_dm_norm, 1e-8 * r.scale);
  EXPECT_TRUE(r.inclusion_holds);
}

TEST(KernelInclusion, UnbalancedTwoLayerFails) {
  const auto chain = MakeLinearChain({3, 2, 3});
  const LawFamily laws = LawsFor(*chain);
  const ParamPoint p = MakeRandom(*chain, 1.0, 3);
  const CriterionReport r = KernelInclusionCheck(*chain, laws, p.flat);
  EXPECT_EQ(r.dim_intersection, 1);
  EXPECT_GT(r.worst_dm_norm, 1e-6 * r.scale);
  EXPECT_FALSE(r.inclusion_holds);
}

TEST(Counterexample, IdentityGramClosedForm) {
  // U^T U = diag(3/4, 1/4), V^T V = diag(1/4, 3/4): S = diag(1/2, -1/2) and
  // U^T U + V^T V = I.
  Matrix u = Matrix::Zero(3, 2);
  Matrix v = Matrix::Zero(3, 2);
  const double c = std::sqrt(0.75), s = std::sqrt(0.25);
  u(0, 0) = c;
  u(1, 1) = s;
  v(0, 0) = s;
  v(1, 1) = c;
  const Counterexample ce = CounterexampleDirection(u, v);
  // Lyapunov with P = I: Delta_S = [Delta_A, S] / 2.
  Matrix sm = Matrix::Zero(2, 2);
  sm.diagonal() << 0.5, -0.5;
  const Matrix delta_a = ce.delta - Symmetrize(ce.delta);
  const Matrix delta_s = Symmetrize(ce.delta);
  EXPECT_LE((delta_s - 0.5 * (delta_a * sm - sm * delta_a)).norm(), 1e-14);
  EXPECT_LE(ce.dphi_norm, 1e-10 * ce.phi_scale);
  EXPECT_LE(ce.dh_norm, 1e-10 * ce.h_scale);
  EXPECT_GE(ce.dm_norm, 1e-6 * ce.m_scale);
}

TEST(Counterexample, RandomFullRank) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix u = rng.NormalMatrix(3, 2);
    const Matrix v = rng.NormalMatrix(3, 2);
    const Counterexample ce = CounterexampleDirection(u, v);
    EXPECT_LE(ce.dphi_norm, 1e-10 * ce.phi_scale);
    EXPECT_LE(ce.dh_norm, 1e-10 * ce.h_scale);
    EXPECT_GE(ce.dm_norm, 1e-6 * ce.m_scale);
    EXPECT_LE((ce.h - u * ce.delta).norm(), 1e-15);
    EXPECT_LE((ce.k + v * ce.delta.transpose()).norm(), 1e-15);
  }
}

TEST(Counterexample, BalancedInputRejected) {
  const auto chain = MakeLinearChain({3, 2, 3});
  const ParamPoint p = MakeRelaxedBalanced(*chain, {0.4}, 5);
  const Matrix v = p.block(0).transpose();
  const Matrix u = p.block(1);
  EXPECT_THROW(CounterexampleDirection(u, v), NumericalError);
}

TEST(Counterexample, RankDeficientRejected) {
  Rng rng(6);
  Matrix u = rng.NormalMatrix(3, 2);
  u.col(1) = u.col(0);
  EXPECT_THROW(CounterexampleDirection(u, rng.NormalMatrix(3, 2)),
               NumericalError);
}

MonomialLifting TwoProducts() {
  Eigen::MatrixXi alpha(2, 3);
  alpha << 1, 1, 0, 1, 0, 1;
  return MonomialLifting(alpha);
}

TEST(LieBracket, HandExample) {
  const MonomialLifting ml = TwoProducts();
  const Vector b = LieBracket(ml, 0, 1, Vector::Ones(3));
  Vector expected(3);
  expected << 0, -1, 1;
  EXPECT_LE((b - expected).norm(), 1e-15);
}

TEST(LieBracket, DisjointAndDiagonalVanish) {
  Eigen::MatrixXi alpha(2, 4);
  alpha << 1, 1, 0, 0, 0, 0, 1, 1;
  const MonomialLifting ml(alpha);
  Rng rng(7);
  const Vector theta = rng.NonzeroVector(4);
  EXPECT_EQ(LieBracket(ml, 0, 1, theta).norm(), 0.0);
  EXPECT_EQ(LieBracket(ml, 0, 0, theta).norm(), 0.0);
}

TEST(LieBracket, AntisymmetricAndMatchesFiniteDifferences) {
  const MonomialLifting ml = AsMonomial(*MakeDiagPathLift(2, 2));
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector theta = rng.NonzeroVector(ml.param_dim(), 0.3);
    for (Eigen::Index i = 0; i < ml.lifted_dim(); ++i) {
      for (Eigen::Index j = 0; j < ml.lifted_dim(); ++j) {
        const Vector bij = LieBracket(ml, i, j, theta);
        EXPECT_EQ(bij, -LieBracket(ml, j, i, theta));
        const Matrix ji = testing::FdJacobian(
            [&](const Vector& t) { return ml.Gradient(i, t); }, theta);
        const Matrix jj = testing::FdJacobian(
            [&](const Vector& t) { return ml.Gradient(j, t); }, theta);
        const Vector fd =
            jj * ml.Gradient(i, theta) - ji * ml.Gradient(j, theta);
        EXPECT_LE((bij - fd).norm(), 1e-5 * (1.0 + bij.norm()));
      }
    }
  }
}

TEST(LieBracket, ZeroInSupportThrows) {
  Vector theta = Vector::Ones(3);
  theta(2) = 0.0;
  EXPECT_THROW(LieBracket(TwoProducts(), 0, 1, theta), NumericalError);
}

TEST(Frobenius, RankOneHolds) {
  const auto model = MakeRankOneLift(2, 2, 2);
  const MonomialLifting ml = AsMonomial(*model);
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const FrobeniusResult r =
        FrobeniusCheck(ml, rng.NonzeroVector(model->param_dim()));
    EXPECT_TRUE(r.holds);
    EXPECT_EQ(r.dim_span, model->param_dim() - 2);
  }
}

TEST(Frobenius, DiagPathHoldsWithExpectedDimension) {
  const auto model = MakeDiagPathLift(2, 2);
  const MonomialLifting ml = AsMonomial(*model);
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const FrobeniusResult r =
        FrobeniusCheck(ml, rng.NonzeroVector(model->param_dim()));
    EXPECT_TRUE(r.holds);
    EXPECT_EQ(r.dim_span, model->param_dim() - 4);
  }
}

TEST(Frobenius, ScalarChainTrivial) {
  const MonomialLifting ml = AsMonomial(*MakeLinearChain({1, 1, 1}));
  Vector theta(2);
  theta << 0.7, -1.3;
  const FrobeniusResult r = FrobeniusCheck(ml, theta);
  EXPECT_TRUE(r.holds);
  EXPECT_EQ(r.dim_span, 1);
}

TEST(Frobenius, ProductBracketStaysInSpan) {
  // [grad t1 t2, grad t1 t3] = (0, -t3, t2) = (t3 grad_1 - t2 grad_2) / t1.
  const FrobeniusResult r = FrobeniusCheck(TwoProducts(), Vector::Ones(3));
  EXPECT_EQ(r.dim_span, 2);
  EXPECT_EQ(r.dim_span_with_brackets, 2);
  EXPECT_TRUE(r.holds);
}

TEST(Frobenius, RandomMonomialFamilies) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXi alpha = Eigen::MatrixXi::Zero(3, 5);
    for (Eigen::Index c = 0; c < 5; ++c) {
      const int e = 1 + static_cast<int>(rng.Uniform(0.0, 2.999));
      for (Eigen::Index i = 0; i < 3; ++i) {
        if (rng.Uniform(0.0, 1.0) < 0.5) alpha(i, c) = e;
      }
    }
    const FrobeniusResult r =
        FrobeniusCheck(MonomialLifting(alpha), rng.NonzeroVector(5, 0.3), 2);
    EXPECT_TRUE(r.holds) << alpha;
  }
}

TEST(Frobenius, DeeperGenerationsAgreeOnShippedModels) {
  Rng rng(11);
  for (const auto& model : {ParametrizationPtr(MakeRankOneLift(2, 2, 2)),
                            ParametrizationPtr(MakeDiagPathLift(2, 2))}) {
    const MonomialLifting ml = AsMonomial(*model);
    const Vector theta = rng.NonzeroVector(model->param_dim());
    const FrobeniusResult one = FrobeniusCheck(ml, theta, 1);
    const FrobeniusResult two = FrobeniusCheck(ml, theta, 2);
    EXPECT_EQ(one.dim_span_with_brackets, two.dim_span_with_brackets);
    EXPECT_TRUE(two.holds);
  }
}

TEST(Frobenius, RejectsZeroCoordinate) {
  const MonomialLifting ml = AsMonomial(*MakeDiagPathLift(1, 1));
  Vector theta = Vector::Ones(3);
  theta(1) = 0.0;
  EXPECT_THROW(FrobeniusCheck(ml, theta), NumericalError);
}

}  // namespace
}  // namespace iflow
