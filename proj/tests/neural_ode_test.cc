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

#include "iflow/neural_ode.h"

#include <gtest/gtest.h>

#include <cmath>

#include "iflow/errors.h"
#include "iflow/random.h"
#include "test_util.h"

namespace iflow {
namespace {

Matrix Sym(Rng& rng, Eigen::Index n, double scale) {
  const Matrix a = rng.NormalMatrix(n, n);
  return scale * 0.5 * (a + a.transpose());
}

FieldFunction SmoothField(const Matrix& a, const Matrix& b) {
  return [a, b](double s) -> Matrix {
    return a * std::cos(3.0 * s) + b * std::sin(2.0 * s);
  };
}

TEST(FieldGrid, StackRoundTrip) {
  Rng rng(1);
  const FieldGrid f = SampleField(
      [&](double s) -> Matrix { return Matrix::Constant(2, 2, s); }, 5);
  EXPECT_EQ(f.size(), 5);
  EXPECT_DOUBLE_EQ(f.h(), 0.2);
  const FieldGrid g = FieldGrid::Unstack(f.Stack(), 5, 2);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(g.samples[k], f.samples[k]);
  EXPECT_THROW(FieldGrid::Unstack(Vector::Zero(7), 2, 2), ShapeError);
  FieldGrid bad;
  EXPECT_THROW(bad.Validate(), ShapeError);
  bad.samples = {Matrix::Zero(2, 2), Matrix::Zero(3, 3)};
  EXPECT_THROW(bad.Validate(), ShapeError);
}

TEST(StateSolve, ZeroField) {
  const FieldGrid f =
      SampleField([](double) -> Matrix { return Matrix::Zero(3, 3); }, 8);
  for (Scheme s : {Scheme::kEuler, Scheme::kRk4}) {
    for (const Matrix& x : StateSolve(f, s)) {
      EXPECT_EQ(x, Matrix::Identity(3, 3));
    }
  }
}

TEST(StateSolve, ConstantScalarField) {
  const double a = 0.7;
  const FieldFunction fn = [a](double) -> Matrix {
    return a * Matrix::Identity(2, 2);
  };
  const auto rk4 = StateSolve(SampleField(fn, 64), Scheme::kRk4);
  EXPECT_LE((rk4.back() - std::exp(a) * Matrix::Identity(2, 2)).norm(), 1e-8);
  const auto euler = StateSolve(SampleField(fn, 64), Scheme::kEuler);
  const double err = (euler.back() - std::exp(a) * Matrix::Identity(2, 2)).norm();
  EXPECT_GT(err, 1e-4);
  EXPECT_LE(err, 3.0 / 64.0);
  EXPECT_NEAR(euler.back()(0, 0), std::pow(1.0 + a / 64.0, 64), 1e-13);
}

TEST(StateSolve, NonsingularPath) {
  Rng rng(2);
  const FieldGrid f = SampleField(SmoothField(Sym(rng, 3, 1.0), rng.NormalMatrix(3, 3)), 16);
  for (const Matrix& x : StateSolve(f, Scheme::kEuler)) {
    EXPECT_GT(std::abs(x.determinant()), 1e-6);
  }
}

TEST(DiscreteAdjoint, ZeroGradientAtMinimum) {
  Rng rng(3);
  const FieldGrid f = SampleField(SmoothField(Sym(rng, 2, 0.5), Sym(rng, 2, 0.5)), 8);
  const QuadraticLoss loss(StateSolve(f, Scheme::kEuler).back());
  for (const Matrix& g : DiscreteAdjointGradient(f, loss)) EXPECT_EQ(g.norm(), 0.0);
}

TEST(DiscreteAdjoint, MatchesFiniteDifferences) {
  Rng rng(4);
  const int l = 6;
  const FieldGrid f =
      SampleField(SmoothField(rng.NormalMatrix(2, 2), rng.NormalMatrix(2, 2)), l);
  const QuadraticLoss loss(rng.NormalMatrix(2, 2));
  const auto g = DiscreteAdjointGradient(f, loss);
  auto value = [&](const Vector& flat) {
    return loss.Value(
        Vec(StateSolve(FieldGrid::Unstack(flat, l, 2), Scheme::kEuler).back()));
  };
  const Vector flat = f.Stack();
  Vector fd(flat.size());
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    fd(i) = testing::FdDerivative(
                [&](double x) {
                  Vector y = flat;
                  y(i) = x;
                  return value(y);
                },
                flat(i), 1e-6) /
            f.h();
  }
  Vector got(flat.size());
  for (int k = 0; k < l; ++k) got.segment(4 * k, 4) = Vec(g[k]);
  EXPECT_LE((got - fd).norm(), 1e-6 * fd.norm());
}

TEST(DiscreteAdjoint, ConvergesToContinuousDensity) {
  Rng rng(5);
  const FieldFunction fn = SmoothField(Sym(rng, 2, 0.6), rng.NormalMatrix(2, 2));
  const QuadraticLoss loss(rng.NormalMatrix(2, 2));
  const int fine = 2048;
  const auto ref = DiscreteAdjointGradient(SampleField(fn, fine), loss);
  auto err = [&](int l) {
    const auto g = DiscreteAdjointGradient(SampleField(fn, l), loss);
    double worst = 0.0;
    for (int k = 0; k < l; ++k) {
      worst = std::max(worst, (g[k] - ref[k * (fine / l)]).norm());
    }
    return worst;
  };
  const double ratio = err(16) / err(32);
  EXPECT_GE(ratio, 1.6);
  EXPECT_LE(ratio, 2.4);
}

TEST(FunctionalFlow, StationaryAndMonotone) {
  Rng rng(6);
  const FieldGrid f = SampleField(SmoothField(Sym(rng, 2, 0.5), Sym(rng, 2, 0.5)), 8);
  const QuadraticLoss at_min(StateSolve(f, Scheme::kEuler).back());
  const FunctionalFlow still = FunctionalGradientFlow(f, at_min, 0.2, 0.01);
  EXPECT_EQ((still.fields.final_state() - f.Stack()).norm(), 0.0);

  const QuadraticLoss loss(rng.NormalMatrix(2, 2));
  const FunctionalFlow flow = FunctionalGradientFlow(f, loss, 0.5, 0.01);
  ASSERT_FALSE(flow.fields.blew_up);
  for (std::size_t k = 1; k < flow.z1.size(); ++k) {
    EXPECT_LE(loss.Value(flow.z1.states[k]),
              loss.Value(flow.z1.states[k - 1]) + 1e-12);
  }
  EXPECT_LE(ConservedFieldDrift(flow, 8, 2), 1.0);
}

TEST(ChainConservedField, ExactAlongFlow) {
  Rng rng(13);
  const FieldGrid f =
      SampleField(SmoothField(Sym(rng, 2, 0.5), rng.NormalMatrix(2, 2)), 8);
  const QuadraticLoss loss(rng.NormalMatrix(2, 2));
  const double coarse =
      ChainConservedFieldDrift(FunctionalGradientFlow(f, loss, 0.5, 0.02), 8, 2);
  const double fine =
      ChainConservedFieldDrift(FunctionalGradientFlow(f, loss, 0.5, 0.01), 8, 2);
  EXPECT_LE(coarse, 1e-6);
  EXPECT_GT(coarse / fine, 8.0);
}

TEST(ChainConservedField, MatchesExpansion) {
  Rng rng(14);
  const FieldGrid f =
      SampleField(SmoothField(rng.NormalMatrix(3, 3), rng.NormalMatrix(3, 3)), 5);
  const auto c = ChainConservedField(f);
  ASSERT_EQ(c.size(), 4u);
  const double h = f.h();
  for (int k = 0; k < 4; ++k) {
    const Matrix& a0 = f.samples[k];
    const Matrix& a1 = f.samples[k + 1];
    const Matrix d = (a1 - a0) / h;
    const Matrix expected = d + d.transpose() + a1.transpose() * a1 -
                            a0 * a0.transpose();
    EXPECT_LE((c[k] - expected).norm(), 1e-11 * expected.norm());
  }
}

TEST(ConservedField, SymmetricConstantIsZero) {
  Rng rng(7);
  const Matrix a0 = Sym(rng, 3, 1.0);
  const FieldGrid f = SampleField([&](double) { return a0; }, 10);
  for (const Matrix& h : ConservedField(f)) EXPECT_LE(h.norm(), 1e-12);
  EXPECT_THROW(ConservedField(SampleField([&](double) { return a0; }, 2)),
               ShapeError);
}

TEST(ConservedField, RecoversLambdaSecondOrder) {
  Rng rng(8);
  const Matrix a0 = Sym(rng, 2, 1.0);
  const LambdaProfile lam = LambdaProfile::Quadratic(1.5);
  auto err = [&](int l) {
    const auto h = ConservedField(RelaxedField(lam, a0, l));
    double worst = 0.0;
    for (int k = 0; k < l; ++k) {
      worst = std::max(
          worst, (h[k] - lam.Value(k / static_cast<double>(l)) *
                             Matrix::Identity(2, 2))
                     .norm());
    }
    return worst;
  };
  EXPECT_LE(err(32), 1e-12 + 10.0 / (32.0 * 32.0));
  const double e1 = err(32), e2 = err(64);
  if (e2 > 1e-12) EXPECT_GT(e1 / e2, 3.0);
}

TEST(RelaxedField, ConstantShift) {
  Matrix a0(2, 2);
  a0 << 1.0, 0.3, 0.3, -0.5;
  const FieldGrid f = RelaxedField(LambdaProfile::Constant(0.6), a0, 4);
  for (int k = 0; k < 4; ++k) {
    const double s = k / 4.0;
    EXPECT_LE((f.samples[k] - a0 - 0.3 * s * Matrix::Identity(2, 2)).norm(),
              1e-14);
  }
  a0(0, 1) = 0.0;
  EXPECT_THROW(RelaxedField(LambdaProfile::Constant(0.0), a0, 4),
               std::invalid_argument);
}

TEST(LambdaProfile, ValuesAndIntegrals) {
  EXPECT_DOUBLE_EQ(LambdaProfile::Constant(2.0).Integral(0.5), 1.0);
  EXPECT_DOUBLE_EQ(LambdaProfile::Linear(2.0).Value(0.25), 0.5);
  EXPECT_NEAR(LambdaProfile::Quadratic(3.0).Integral(1.0), 1.0, 1e-15);
  const LambdaProfile s = LambdaProfile::Sampled({0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(s.Value(0.25), 0.5);
  EXPECT_NEAR(s.Integral(1.0), 0.5, 1e-15);
  EXPECT_NEAR(s.Integral(0.5), 0.25, 1e-15);
}

TEST(QuadratureRule, WeightsAndExactness) {
  const QuadratureRule rule;
  EXPECT_EQ(rule.size(), 32);
  EXPECT_NEAR(rule.weights().sum(), 1.0, 1e-14);
  EXPECT_GT(rule.weights().minCoeff(), 0.0);
  EXPECT_NEAR(rule.Integrate([](double s) { return std::exp(s); }),
              std::exp(1.0) - 1.0, 1e-14);
  EXPECT_THROW(QuadratureRule(0), std::invalid_argument);
}

TEST(GammaProfile, EndpointsAndZeroCases) {
  const QuadratureRule rule;
  const GammaProfile zero(LambdaProfile::Constant(0.0), rule);
  EXPECT_LE(zero.MaxAbs(), 1e-14);
  const GammaProfile constant(LambdaProfile::Constant(0.4), rule);
  EXPECT_LE(constant.MaxAbs(), 1e-10);
  const GammaProfile linear(LambdaProfile::Linear(1.0), rule);
  EXPECT_LE(std::abs(linear(0.5)), 1e-10);
  for (const GammaProfile* g : {&zero, &constant, &linear}) {
    EXPECT_EQ((*g)(0.0), 0.0);
    EXPECT_LE(std::abs((*g)(1.0)), 1e-15);
  }
}

TEST(InfiniteDepthRhs, IdentityAndScalar) {
  const QuadratureRule rule;
  const Vector gamma = Vector::Zero(rule.size());
  Rng rng(9);
  const Matrix g = rng.NormalMatrix(3, 3);
  EXPECT_LE((InfiniteDepthRhs(Matrix::Identity(3, 3), gamma, g, rule) + g).norm(),
            1e-13 * g.norm());
  Matrix z(1, 1), g1(1, 1);
  z << -1.4;
  g1 << 0.3;
  EXPECT_NEAR(InfiniteDepthRhs(z, gamma, g1, rule)(0, 0), -1.96 * 0.3, 1e-13);
  EXPECT_THROW(InfiniteDepthRhs(Matrix::Zero(2, 2), Vector::Zero(rule.size()),
                                Matrix::Ones(2, 2), rule),
               NumericalError);
}

TEST(InfiniteDepthRhs, MatchesDirectQuadrature) {
  const QuadratureRule rule(16);
  Rng rng(10);
  const Matrix z = rng.NormalMatrix(2, 2) + 2.0 * Matrix::Identity(2, 2);
  const Matrix g = rng.NormalMatrix(2, 2);
  Vector gamma(rule.size());
  for (int q = 0; q < rule.size(); ++q) gamma(q) = 0.1 * rule.nodes()(q);
  Matrix expected = Matrix::Zero(2, 2);
  for (int q = 0; q < rule.size(); ++q) {
    const double s = rule.nodes()(q);
    expected -= rule.weights()(q) * std::exp(gamma(q)) *
                SymEig(z * z.transpose()).Apply([s](double x) {
                  return std::pow(x, 1.0 - s);
                }) *
                g *
                SymEig(z.transpose() * z).Apply([s](double x) {
                  return std::pow(x, s);
                });
  }
  EXPECT_LE((InfiniteDepthRhs(z, gamma, g, rule) - expected).norm(),
            1e-12 * expected.norm());
}

TEST(EulerConvergence, ZeroFieldIsExact) {
  const EulerConvergence c = EulerConvergenceCheck(
      [](double) -> Matrix { return Matrix::Zero(2, 2); }, 8);
  EXPECT_EQ(c.error_coarse, 0.0);
  EXPECT_EQ(c.error_fine, 0.0);
}

TEST(EulerConvergence, FirstOrder) {
  Rng rng(11);
  const EulerConvergence c =
      EulerConvergenceCheck(SmoothField(Sym(rng, 3, 1.0), Sym(rng, 3, 1.0)), 32);
  EXPECT_GE(c.ratio, 1.6);
  EXPECT_LE(c.ratio, 2.4);
}

TEST(PerturbedBalance, EtaBounded) {
  Rng rng(12);
  const Matrix a0 = Sym(rng, 2, 0.5);
  const LambdaProfile lam = LambdaProfile::Constant(0.4);
  double prev = 0.0;
  for (int l : {16, 32, 64, 128}) {
    const PerturbedBalance p = PerturbedBalanceCheck(RelaxedField(lam, a0, l), lam);
    EXPECT_TRUE(std::isfinite(p.eta));
    if (prev > 0.0) EXPECT_LE(p.eta, 1.5 * prev + 1.0);
    prev = p.eta;
  }
}

TEST(ExpSym, Diagonal) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -2.0;
  const Matrix e = ExpSym(a);
  EXPECT_NEAR(e(0, 0), std::exp(1.0), 1e-14);
  EXPECT_NEAR(e(1, 1), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(e(0, 1), 0.0, 1e-15);
}

}  // namespace
}  // namespace iflow
