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

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "iflow/errors.h"

namespace iflow {
namespace {

Matrix Eye(Eigen::Index n) { return Matrix::Identity(n, n); }

// Linear interpolant of the samples at s, extrapolated past s_{L-1}.
Matrix Interpolate(const FieldGrid& field, int cell, double frac) {
  const int l = field.size();
  const Matrix& lo = field.samples[cell];
  Matrix hi;
  if (cell + 1 < l) {
    hi = field.samples[cell + 1];
  } else if (l >= 2) {
    hi = 2.0 * field.samples[l - 1] - field.samples[l - 2];
  } else {
    hi = lo;
  }
  return (1.0 - frac) * lo + frac * hi;
}

Matrix Rk4Step(const Matrix& x, const Matrix& a0, const Matrix& am,
               const Matrix& a1, double h) {
  const Matrix k1 = a0 * x;
  const Matrix k2 = am * (x + 0.5 * h * k1);
  const Matrix k3 = am * (x + 0.5 * h * k2);
  const Matrix k4 = a1 * (x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double SupError(const std::vector<Matrix>& euler,
                const std::vector<Matrix>& ref, int stride) {
  double worst = 0.0;
  for (std::size_t k = 0; k < euler.size(); ++k) {
    worst = std::max(worst, (euler[k] - ref[k * stride]).norm());
  }
  return worst;
}

}  // namespace

// ------------------------------------------------------------------ grid --

Vector FieldGrid::Stack() const {
  Validate();
  const Eigen::Index block = dim() * dim();
  Vector out(block * size());
  for (int k = 0; k < size(); ++k) {
    out.segment(k * block, block) = Vec(samples[k]);
  }
  return out;
}

FieldGrid FieldGrid::Unstack(const Vector& flat, int size, Eigen::Index dim) {
  const Eigen::Index block = dim * dim;
  if (size < 1 || flat.size() != block * size) {
    throw ShapeError("FieldGrid::Unstack: length does not match the grid");
  }
  FieldGrid out;
  out.samples.reserve(size);
  for (int k = 0; k < size; ++k) {
    out.samples.push_back(Unvec(flat.segment(k * block, block), dim, dim));
  }
  return out;
}

void FieldGrid::Validate() const {
  if (samples.empty()) throw ShapeError("FieldGrid: no samples");
  const Eigen::Index n = samples.front().rows();
  for (const Matrix& a : samples) {
    if (a.rows() != n || a.cols() != n || n == 0) {
      throw ShapeError("FieldGrid: samples must be equal square matrices");
    }
  }
}

FieldGrid SampleField(const FieldFunction& fn, int size) {
  if (size < 1) throw std::invalid_argument("SampleField: size must be >= 1");
  FieldGrid out;
  for (int k = 0; k < size; ++k) {
    out.samples.push_back(fn(static_cast<double>(k) / size));
  }
  out.Validate();
  return out;
}

// ----------------------------------------------------------------- state --

std::vector<Matrix> StateSolve(const FieldGrid& field, Scheme scheme) {
  field.Validate();
  const int l = field.size();
  const double h = field.h();
  std::vector<Matrix> x;
  x.reserve(l + 1);
  x.push_back(Eye(field.dim()));
  for (int k = 0; k < l; ++k) {
    if (scheme == Scheme::kEuler) {
      x.push_back(x.back() + h * field.samples[k] * x.back());
    } else {
      x.push_back(Rk4Step(x.back(), field.samples[k],
                          Interpolate(field, k, 0.5),
                          Interpolate(field, k, 1.0), h));
    }
  }
  return x;
}

std::vector<Matrix> StateSolve(const FieldFunction& fn, int steps) {
  if (steps < 1) throw std::invalid_argument("StateSolve: steps must be >= 1");
  const double h = 1.0 / steps;
  Matrix a0 = fn(0.0);
  std::vector<Matrix> x;
  x.reserve(steps + 1);
  x.push_back(Eye(a0.rows()));
  for (int k = 0; k < steps; ++k) {
    const double s = k * h;
    Matrix a1 = fn(s + h);
    x.push_back(Rk4Step(x.back(), a0, fn(s + 0.5 * h), a1, h));
    a0 = std::move(a1);
  }
  return x;
}

std::vector<Matrix> DiscreteAdjointGradient(const FieldGrid& field,
                                            const Objective& obj) {
  const auto x = StateSolve(field, Scheme::kEuler);
  const int l = field.size();
  const Eigen::Index n = field.dim();
  const double h = field.h();
  if (obj.shape().rows != n || obj.shape().cols != n) {
    throw ShapeError("DiscreteAdjointGradient: objective shape differs");
  }
  Matrix lambda = Unvec(obj.Gradient(Vec(x[l])), n, n);
  std::vector<Matrix> g(l);
  for (int k = l - 1; k >= 0; --k) {
    g[k] = lambda * x[k].transpose();
    lambda = (Eye(n) + h * field.samples[k]).transpose() * lambda;
  }
  return g;
}

FunctionalFlow FunctionalGradientFlow(const FieldGrid& field0,
                                      const Objective& obj, double t_final,
                                      double dt, int record_every) {
  field0.Validate();
  const int l = field0.size();
  const Eigen::Index n = field0.dim();
  auto rhs = [&obj, l, n](const Vector& stacked) -> Vector {
    const FieldGrid field = FieldGrid::Unstack(stacked, l, n);
    const auto g = DiscreteAdjointGradient(field, obj);
    Vector out(stacked.size());
    const Eigen::Index block = n * n;
    for (int k = 0; k < l; ++k) out.segment(k * block, block) = -Vec(g[k]);
    return out;
  };
  FunctionalFlow out;
  out.fields = Integrate(rhs, field0.Stack(), t_final, dt, Scheme::kRk4,
                         record_every);
  out.z1.times = out.fields.times;
  out.z1.blew_up = out.fields.blew_up;
  out.z1.failure = out.fields.failure;
  out.z1.last_valid_time = out.fields.last_valid_time;
  for (const Vector& s : out.fields.states) {
    out.z1.states.push_back(
        Vec(StateSolve(FieldGrid::Unstack(s, l, n), Scheme::kEuler).back()));
  }
  return out;
}

std::vector<Matrix> ConservedField(const FieldGrid& field) {
  field.Validate();
  const int l = field.size();
  if (l < 3) throw ShapeError("ConservedField: need at least 3 samples");
  const double h = field.h();
  const auto& a = field.samples;
  std::vector<Matrix> out(l);
  for (int k = 0; k < l; ++k) {
    Matrix d;
    if (k == 0) {
      d = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h);
    } else if (k == l - 1) {
      d = (3.0 * a[l - 1] - 4.0 * a[l - 2] + a[l - 3]) / (2.0 * h);
    } else {
      d = (a[k + 1] - a[k - 1]) / (2.0 * h);
    }
    out[k] = d + d.transpose() + a[k].transpose() * a[k] -
             a[k] * a[k].transpose();
  }
  return out;
}

double ConservedFieldDrift(const FunctionalFlow& flow, int size,
                           Eigen::Index dim) {
  const auto h0 = ConservedField(
      FieldGrid::Unstack(flow.fields.states.front(), size, dim));
  double worst = 0.0;
  for (const Vector& s : flow.fields.states) {
    const auto h = ConservedField(FieldGrid::Unstack(s, size, dim));
    for (int k = 0; k < size; ++k) worst = std::max(worst, (h[k] - h0[k]).norm());
  }
  return worst;
}

std::vector<Matrix> ChainConservedField(const FieldGrid& field) {
  field.Validate();
  const int l = field.size();
  if (l < 2) throw ShapeError("ChainConservedField: need at least 2 samples");
  const double h = field.h();
  const Matrix eye = Eye(field.dim());
  std::vector<Matrix> out;
  out.reserve(l - 1);
  for (int k = 0; k + 1 < l; ++k) {
    const Matrix u0 = eye + h * field.samples[k];
    const Matrix u1 = eye + h * field.samples[k + 1];
    out.push_back((u1.transpose() * u1 - u0 * u0.transpose()) / (h * h));
  }
  return out;
}

double ChainConservedFieldDrift(const FunctionalFlow& flow, int size,
                                Eigen::Index dim) {
  const auto h0 = ChainConservedField(
      FieldGrid::Unstack(flow.fields.states.front(), size, dim));
  double worst = 0.0;
  for (const Vector& s : flow.fields.states) {
    const auto h = ChainConservedField(FieldGrid::Unstack(s, size, dim));
    for (std::size_t k = 0; k < h.size(); ++k) {
      worst = std::max(worst, (h[k] - h0[k]).norm());
    }
  }
  return worst;
}

// ---------------------------------------------------------------- lambda --

LambdaProfile LambdaProfile::Constant(double c) {
  return LambdaProfile(Kind::kConstant, c, {});
}

LambdaProfile LambdaProfile::Linear(double c) {
  return LambdaProfile(Kind::kLinear, c, {});
}

LambdaProfile LambdaProfile::Quadratic(double c) {
  return LambdaProfile(Kind::kQuadratic, c, {});
}

LambdaProfile LambdaProfile::Sampled(std::vector<double> values) {
  if (values.size() < 2) {
    throw std::invalid_argument("LambdaProfile: need at least two samples");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericalError("LambdaProfile: non-finite sample");
    }
  }
  return LambdaProfile(Kind::kSampled, 0.0, std::move(values));
}

double LambdaProfile::Value(double s) const {
  switch (kind_) {
    case Kind::kConstant:
      return c_;
    case Kind::kLinear:
      return c_ * s;
    case Kind::kQuadratic:
      return c_ * s * s;
    case Kind::kSampled: {
      const int cells = static_cast<int>(values_.size()) - 1;
      const double x = std::clamp(s, 0.0, 1.0) * cells;
      const int i = std::min(static_cast<int>(x), cells - 1);
      const double t = x - i;
      return (1.0 - t) * values_[i] + t * values_[i + 1];
    }
  }
  return 0.0;
}

double LambdaProfile::Integral(double s) const {
  switch (kind_) {
    case Kind::kConstant:
      return c_ * s;
    case Kind::kLinear:
      return 0.5 * c_ * s * s;
    case Kind::kQuadratic:
      return c_ * s * s * s / 3.0;
    case Kind::kSampled: {
      const int cells = static_cast<int>(values_.size()) - 1;
      const double width = 1.0 / cells;
      const double x = std::clamp(s, 0.0, 1.0) * cells;
      const int i = std::min(static_cast<int>(x), cells - 1);
      double acc = 0.0;
      for (int k = 0; k < i; ++k) {
        acc += 0.5 * width * (values_[k] + values_[k + 1]);
      }
      const double t = x - i;
      const double end = (1.0 - t) * values_[i] + t * values_[i + 1];
      return acc + 0.5 * t * width * (values_[i] + end);
    }
  }
  return 0.0;
}

FieldGrid RelaxedField(const LambdaProfile& lambda, const Matrix& a0,
                       int size) {
  if (a0.rows() != a0.cols()) {
    throw ShapeError("RelaxedField: A0 must be square");
  }
  if ((a0 - a0.transpose()).norm() > 1e-12 * std::max(1.0, a0.norm())) {
    throw std::invalid_argument("RelaxedField: A0 must be symmetric");
  }
  return SampleField(
      [&](double s) -> Matrix {
        return a0 + 0.5 * lambda.Integral(s) * Eye(a0.rows());
      },
      size);
}

// ------------------------------------------------------------ quadrature --

QuadratureRule::QuadratureRule(int nodes) {
  if (nodes < 1) throw std::invalid_argument("QuadratureRule: nodes >= 1");
  Matrix jacobi = Matrix::Zero(nodes, nodes);
  for (int k = 1; k < nodes; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  const Spectrum spec = SymEig(jacobi);
  nodes_ = (spec.eigenvalues.array() + 1.0) * 0.5;
  weights_ = spec.eigenvectors.row(0).transpose().array().square();
  for (int p = 0; p <= 2 * nodes - 1; ++p) {
    double q = 0.0;
    for (int i = 0; i < nodes; ++i) q += weights_(i) * std::pow(nodes_(i), p);
    const double exact = 1.0 / (p + 1.0);
    if (std::abs(q - exact) > 1e-12) {
      std::ostringstream os;
      os << "QuadratureRule: not exact on s^" << p << " (error "
         << std::abs(q - exact) << ")";
      throw NumericalError(os.str());
    }
  }
}

double QuadratureRule::Integrate(const std::function<double(double)>& f) const {
  double out = 0.0;
  for (int i = 0; i < size(); ++i) out += weights_(i) * f(nodes_(i));
  return out;
}

// ----------------------------------------------------------------- gamma --

namespace {

// psi(u) = int_0^u int_0^x f and its slope int_0^u f on a grid of `panels`.
void Tabulate(const std::function<double(double)>& f, int panels,
              std::vector<double>& value, std::vector<double>& slope) {
  const int fine = 2 * panels;
  const double hf = 1.0 / fine;
  std::vector<double> cum(fine + 1, 0.0);
  for (int j = 0; j < fine; ++j) {
    const double t = j * hf;
    cum[j + 1] =
        cum[j] + hf / 6.0 * (f(t) + 4.0 * f(t + 0.5 * hf) + f(t + hf));
  }
  const double h = 1.0 / panels;
  value.assign(panels + 1, 0.0);
  slope.assign(panels + 1, 0.0);
  for (int i = 0; i <= panels; ++i) slope[i] = cum[2 * i];
  for (int i = 0; i < panels; ++i) {
    value[i + 1] = value[i] + h / 6.0 *
                                  (cum[2 * i] + 4.0 * cum[2 * i + 1] +
                                   cum[2 * i + 2]);
  }
}

}  // namespace

double GammaProfile::Table::Eval(double s, int panels) const {
  const double x = std::clamp(s, 0.0, 1.0) * panels;
  const int i = std::min(static_cast<int>(x), panels);
  const double t = x - i;
  if (i == panels || t == 0.0) return value[i];
  const double h = 1.0 / panels;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * value[i] + (t3 - 2 * t2 + t) * h * slope[i] +
         (-2 * t3 + 3 * t2) * value[i + 1] + (t3 - t2) * h * slope[i + 1];
}

GammaProfile::GammaProfile(const LambdaProfile& lambda,
                           const QuadratureRule& rule, int panels)
    : panels_(panels) {
  if (panels < 1) throw std::invalid_argument("GammaProfile: panels >= 1");
  Tabulate([&](double v) { return lambda.Value(1.0 - v); }, panels,
           psi1_.value, psi1_.slope);
  Tabulate([&](double v) { return lambda.Value(v); }, panels, psi2_.value,
           psi2_.slope);
  at_nodes_.resize(rule.size());
  for (int q = 0; q < rule.size(); ++q) at_nodes_(q) = (*this)(rule.nodes()(q));
}

double GammaProfile::operator()(double s) const {
  const double p1 = psi1_.value[panels_];
  const double p2 = psi2_.value[panels_];
  return (1.0 - s) * p1 - psi1_.Eval(1.0 - s, panels_) - s * p2 +
         psi2_.Eval(s, panels_);
}

double GammaProfile::MaxAbs() const {
  double worst = at_nodes_.size() ? at_nodes_.cwiseAbs().maxCoeff() : 0.0;
  for (int i = 0; i <= 256; ++i) {
    worst = std::max(worst, std::abs((*this)(i / 256.0)));
  }
  return worst;
}

// -------------------------------------------------------- infinite depth --

Matrix InfiniteDepthRhs(const Matrix& z1, const Vector& gamma_at_nodes,
                        const Matrix& g, const QuadratureRule& rule) {
  if (z1.rows() != z1.cols() || g.rows() != z1.rows() ||
      g.cols() != z1.cols()) {
    throw ShapeError("InfiniteDepthRhs: Z1 and G must be equal square");
  }
  if (gamma_at_nodes.size() != rule.size()) {
    throw ShapeError("InfiniteDepthRhs: gamma values do not match the rule");
  }
  const Spectrum outer = SymEig(z1 * z1.transpose());
  const Spectrum inner = SymEig(z1.transpose() * z1);
  const double top = outer.eigenvalues.cwiseAbs().maxCoeff();
  if (!(outer.eigenvalues.minCoeff() > 1e-12 * top) ||
      !(inner.eigenvalues.minCoeff() > 1e-12 * top)) {
    throw NumericalError("InfiniteDepthRhs: Z1 is singular");
  }
  const Eigen::Index n = z1.rows();
  const Vector la = outer.eigenvalues.array().log();
  const Vector lb = inner.eigenvalues.array().log();
  Matrix kernel = Matrix::Zero(n, n);
  for (int q = 0; q < rule.size(); ++q) {
    const double s = rule.nodes()(q);
    const double w = rule.weights()(q) * std::exp(gamma_at_nodes(q));
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        kernel(i, j) += w * std::exp((1.0 - s) * la(i) + s * lb(j));
      }
    }
  }
  const Matrix gt =
      outer.eigenvectors.transpose() * g * inner.eigenvectors;
  return -outer.eigenvectors * kernel.cwiseProduct(gt) *
         inner.eigenvectors.transpose();
}

IntrinsicRhs InfiniteDepthIntrinsic(Vector gamma_at_nodes,
                                    QuadratureRule rule) {
  return [gamma = std::move(gamma_at_nodes), rule = std::move(rule)](
             const Matrix& z, const Matrix& g) {
    return InfiniteDepthRhs(z, gamma, g, rule);
  };
}

// ----------------------------------------------------------- diagnostics --

EulerConvergence EulerConvergenceCheck(const FieldFunction& fn, int size) {
  if (size < 1) {
    throw std::invalid_argument("EulerConvergenceCheck: size must be >= 1");
  }
  EulerConvergence out;
  out.size = size;
  const auto run = [&fn](int l) {
    const auto euler = StateSolve(SampleField(fn, l), Scheme::kEuler);
    const auto ref = StateSolve(fn, 16 * l);
    return SupError(euler, ref, 16);
  };
  out.error_coarse = run(size);
  out.error_fine = run(2 * size);
  out.ratio = out.error_fine > 0.0
                  ? out.error_coarse / out.error_fine
                  : std::numeric_limits<double>::quiet_NaN();
  return out;
}

PerturbedBalance PerturbedBalanceCheck(const FieldGrid& field,
                                       const LambdaProfile& lambda) {
  field.Validate();
  const int l = field.size();
  const double h = field.h();
  const Eigen::Index n = field.dim();
  std::vector<Matrix> u;
  std::vector<double> lam;
  for (int k = 0; k < l; ++k) {
    u.push_back(Eye(n) + h * field.samples[k]);
    lam.push_back(lambda.Value(k * h));
  }
  PerturbedBalance out;
  for (int k = 0; k + 1 < l; ++k) {
    const Matrix d = u[k + 1].transpose() * u[k + 1] - u[k] * u[k].transpose() -
                     h * h * lam[k] * Eye(n);
    out.eta = std::max(out.eta, d.norm());
  }
  out.eta *= static_cast<double>(l) * l;
  if (l < 2) return out;
  // a_k = h^2 sum_{i=1}^k lambda_{L-1-i}.
  std::vector<double> a(l, 0.0);
  for (int k = 1; k < l; ++k) a[k] = a[k - 1] + h * h * lam[l - 1 - k];
  const Matrix p = u[l - 1] * u[l - 1].transpose();
  Matrix chain = u[l - 1];
  Matrix poly = p;
  for (int j = l - 2; j >= 0; --j) {
    if (j < l - 2) {
      chain = chain * u[j + 1];
      poly = poly * (p - a[l - j - 2] * Eye(n));
    }
    out.lhs = std::max(out.lhs, (chain * chain.transpose() - poly).norm());
  }
  return out;
}

Matrix ExpSym(const Matrix& a) {
  return SymEig(a).Apply([](double x) { return std::exp(x); });
}

}  // namespace iflow
