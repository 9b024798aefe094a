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

#include "iflow/models.h"

#include <sstream>
#include <stdexcept>

#include "iflow/errors.h"

namespace iflow {
namespace {

Matrix Identity(Eigen::Index n) { return Matrix::Identity(n, n); }

// Product U_hi ... U_lo of 0-based layer indices; identity of size `n` when
// the range is empty.
Matrix ChainProduct(const std::vector<Matrix>& u, int lo, int hi,
                    Eigen::Index n) {
  if (hi < lo) return Identity(n);
  Matrix out = u[lo];
  for (int k = lo + 1; k <= hi; ++k) out = u[k] * out;
  return out;
}

}  // namespace

// ---------------------------------------------------------------- layout --

ParamLayout::ParamLayout(std::vector<Block> blocks)
    : blocks_(std::move(blocks)) {
  offsets_.reserve(blocks_.size());
  for (const Block& b : blocks_) {
    if (b.rows < 1 || b.cols < 1) {
      throw ShapeError("ParamLayout: block '" + b.name + "' has empty shape");
    }
    offsets_.push_back(size_);
    size_ += b.size();
  }
}

std::size_t ParamLayout::IndexOf(const std::string& name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return i;
  }
  throw std::invalid_argument("ParamLayout: no block named '" + name + "'");
}

Matrix ParamLayout::Get(const Vector& flat, std::size_t i) const {
  if (flat.size() != size_) {
    throw ShapeError("ParamLayout::Get: flat vector has wrong length");
  }
  const Block& b = blocks_.at(i);
  return Eigen::Map<const Matrix>(flat.data() + offsets_[i], b.rows, b.cols);
}

void ParamLayout::Set(Vector& flat, std::size_t i, const Matrix& value) const {
  const Block& b = blocks_.at(i);
  if (flat.size() != size_ || value.rows() != b.rows ||
      value.cols() != b.cols) {
    throw ShapeError("ParamLayout::Set: shape mismatch for block '" + b.name +
                     "'");
  }
  Eigen::Map<Matrix>(flat.data() + offsets_[i], b.rows, b.cols) = value;
}

std::vector<Matrix> ParamLayout::Unpack(const Vector& flat) const {
  std::vector<Matrix> out;
  out.reserve(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) out.push_back(Get(flat, i));
  return out;
}

Vector ParamLayout::Pack(const std::vector<Matrix>& blocks) const {
  if (blocks.size() != blocks_.size()) {
    throw ShapeError("ParamLayout::Pack: wrong number of blocks");
  }
  Vector flat = Vector::Zero(size_);
  for (std::size_t i = 0; i < blocks.size(); ++i) Set(flat, i, blocks[i]);
  return flat;
}

// --------------------------------------------------------- parametrization --

Matrix Parametrization::Metric(const Vector& theta) const {
  const Matrix j = Jacobian(theta);
  return Symmetrize(j * j.transpose());
}

Matrix Parametrization::MetricDirectional(const Vector& theta,
                                          const Vector& v) const {
  CheckTheta(theta);
  if (v.size() != theta.size()) {
    throw ShapeError("MetricDirectional: direction has wrong length");
  }
  const double vnorm = v.norm();
  if (vnorm == 0.0) {
    throw std::invalid_argument("MetricDirectional: zero direction");
  }
  const double step = 1e-5 * (1.0 + theta.norm()) / vnorm;
  return (Metric(theta + step * v) - Metric(theta - step * v)) / (2.0 * step);
}

Vector Parametrization::PullBack(const Vector& theta,
                                 const Vector& grad_z) const {
  if (grad_z.size() != lifted_dim()) {
    throw ShapeError("PullBack: gradient has wrong length");
  }
  return Jacobian(theta).transpose() * grad_z;
}

ParamPoint Parametrization::Point(Vector flat) const {
  CheckTheta(flat);
  return {std::move(flat), layout_};
}

void Parametrization::CheckTheta(const Vector& theta) const {
  if (theta.size() != param_dim()) {
    std::ostringstream os;
    os << kind() << ": expected " << param_dim() << " parameters, got "
       << theta.size();
    throw ShapeError(os.str());
  }
}

// ------------------------------------------------------------ linear chain --

namespace {

ParamLayout ChainLayout(const std::vector<Eigen::Index>& dims) {
  if (dims.size() < 2) {
    throw ShapeError("LinearChain: need at least two widths");
  }
  std::vector<Block> blocks;
  for (std::size_t j = 1; j < dims.size(); ++j) {
    blocks.push_back({"U" + std::to_string(j), dims[j], dims[j - 1]});
  }
  return ParamLayout(std::move(blocks));
}

LiftShape ChainShape(const std::vector<Eigen::Index>& dims) {
  if (dims.size() < 2) {
    throw ShapeError("LinearChain: need at least two widths");
  }
  return {dims.back(), dims.front()};
}

}  // namespace

LinearChain::LinearChain(std::vector<Eigen::Index> dims)
    : Parametrization(ChainLayout(dims), ChainShape(dims)),
      dims_(std::move(dims)) {}

std::vector<Matrix> LinearChain::Layers(const Vector& theta) const {
  CheckTheta(theta);
  return layout().Unpack(theta);
}

Vector LinearChain::Pack(const std::vector<Matrix>& layers) const {
  return layout().Pack(layers);
}

Matrix LinearChain::Product(const Vector& theta) const {
  const auto u = Layers(theta);
  return ChainProduct(u, 0, depth() - 1, dims_.front());
}

Vector LinearChain::Lift(const Vector& theta) const {
  return Vec(Product(theta));
}

Matrix LinearChain::Jacobian(const Vector& theta) const {
  const auto u = Layers(theta);
  const int l = depth();
  Matrix jac(lifted_dim(), param_dim());
  for (int j = 0; j < l; ++j) {
    const Matrix below = ChainProduct(u, 0, j - 1, dims_[0]);
    const Matrix above = ChainProduct(u, j + 1, l - 1, dims_[j + 1]);
    jac.middleCols(layout().offset(j), u[j].size()) =
        Kron(below.transpose(), above);
  }
  return jac;
}

std::vector<std::pair<Matrix, Matrix>> LinearChain::GradSumFactors(
    const Vector& theta) const {
  const auto u = Layers(theta);
  const int l = depth();
  std::vector<std::pair<Matrix, Matrix>> out;
  out.reserve(l);
  for (int j = 0; j < l; ++j) {
    const Matrix below = ChainProduct(u, 0, j - 1, dims_[0]);
    const Matrix above = ChainProduct(u, j + 1, l - 1, dims_[j + 1]);
    out.emplace_back(above * above.transpose(), below.transpose() * below);
  }
  return out;
}

Matrix LinearChain::Metric(const Vector& theta) const {
  Matrix m = Matrix::Zero(lifted_dim(), lifted_dim());
  for (const auto& [s, t] : GradSumFactors(theta)) m += Kron(t, s);
  return m;
}

Matrix LinearChain::MetricDirectional(const Vector& theta,
                                      const Vector& v) const {
  if (depth() != 2) return Parametrization::MetricDirectional(theta, v);
  CheckTheta(theta);
  if (v.size() != theta.size()) {
    throw ShapeError("MetricDirectional: direction has wrong length");
  }
  if (v.norm() == 0.0) {
    throw std::invalid_argument("MetricDirectional: zero direction");
  }
  const auto u = layout().Unpack(theta);
  const auto du = layout().Unpack(v);
  const Matrix d_outer = du[1] * u[1].transpose() + u[1] * du[1].transpose();
  const Matrix d_inner = du[0].transpose() * u[0] + u[0].transpose() * du[0];
  return Kron(Identity(dims_[0]), d_outer) + Kron(d_inner, Identity(dims_[2]));
}

Vector LinearChain::PullBack(const Vector& theta, const Vector& grad_z) const {
  if (grad_z.size() != lifted_dim()) {
    throw ShapeError("PullBack: gradient has wrong length");
  }
  const auto u = Layers(theta);
  const int l = depth();
  const Matrix g = Unvec(grad_z, dims_.back(), dims_.front());
  std::vector<Matrix> grads;
  grads.reserve(l);
  for (int j = 0; j < l; ++j) {
    const Matrix below = ChainProduct(u, 0, j - 1, dims_[0]);
    const Matrix above = ChainProduct(u, j + 1, l - 1, dims_[j + 1]);
    grads.push_back(above.transpose() * g * below.transpose());
  }
  return layout().Pack(grads);
}

std::optional<Eigen::MatrixXi> LinearChain::MonomialExponents() const {
  for (std::size_t j = 1; j + 1 < dims_.size(); ++j) {
    if (dims_[j] != 1) return std::nullopt;
  }
  const int l = depth();
  const Eigen::Index rows = dims_.back();
  Eigen::MatrixXi alpha = Eigen::MatrixXi::Zero(lifted_dim(), param_dim());
  if (l == 1) {
    alpha.setIdentity();
    return alpha;
  }
  for (Eigen::Index b = 0; b < dims_.front(); ++b) {
    for (Eigen::Index a = 0; a < rows; ++a) {
      const Eigen::Index i = a + b * rows;
      alpha(i, layout().offset(0) + b) = 1;
      for (int j = 1; j + 1 < l; ++j) alpha(i, layout().offset(j)) = 1;
      alpha(i, layout().offset(l - 1) + a) = 1;
    }
  }
  return alpha;
}

// --------------------------------------------------------------- rank one --

RankOneLift::RankOneLift(Eigen::Index n, Eigen::Index m, Eigen::Index r)
    : Parametrization(ParamLayout({{"U", n, r}, {"V", m, r}}), {n * m, r}),
      n_(n),
      m_(m),
      r_(r) {}

Vector RankOneLift::Lift(const Vector& theta) const {
  CheckTheta(theta);
  const Matrix u = layout().Get(theta, 0);
  const Matrix v = layout().Get(theta, 1);
  Vector z(lifted_dim());
  for (Eigen::Index j = 0; j < r_; ++j) {
    z.segment(j * n_ * m_, n_ * m_) =
        Vec(u.col(j) * v.col(j).transpose());
  }
  return z;
}

Matrix RankOneLift::Jacobian(const Vector& theta) const {
  CheckTheta(theta);
  const Matrix u = layout().Get(theta, 0);
  const Matrix v = layout().Get(theta, 1);
  Matrix jac = Matrix::Zero(lifted_dim(), param_dim());
  const Eigen::Index nm = n_ * m_;
  for (Eigen::Index j = 0; j < r_; ++j) {
    jac.block(j * nm, layout().offset(0) + j * n_, nm, n_) =
        Kron(v.col(j), Identity(n_));
    jac.block(j * nm, layout().offset(1) + j * m_, nm, m_) =
        Kron(Identity(m_), u.col(j));
  }
  return jac;
}

std::optional<Eigen::MatrixXi> RankOneLift::MonomialExponents() const {
  Eigen::MatrixXi alpha = Eigen::MatrixXi::Zero(lifted_dim(), param_dim());
  for (Eigen::Index j = 0; j < r_; ++j) {
    for (Eigen::Index b = 0; b < m_; ++b) {
      for (Eigen::Index a = 0; a < n_; ++a) {
        const Eigen::Index i = j * n_ * m_ + a + b * n_;
        alpha(i, layout().offset(0) + j * n_ + a) = 1;
        alpha(i, layout().offset(1) + j * m_ + b) = 1;
      }
    }
  }
  return alpha;
}

// -------------------------------------------------------------- diag path --

DiagPathLift::DiagPathLift(Eigen::Index n, Eigen::Index m)
    : Parametrization(ParamLayout({{"u", n, 1}, {"V", n, m}, {"w", m, 1}}),
                      {n, m}),
      n_(n),
      m_(m) {}

Vector DiagPathLift::Lift(const Vector& theta) const {
  CheckTheta(theta);
  const Vector u = layout().Get(theta, 0);
  const Matrix v = layout().Get(theta, 1);
  const Vector w = layout().Get(theta, 2);
  return Vec(u.asDiagonal() * v * w.asDiagonal());
}

Matrix DiagPathLift::Jacobian(const Vector& theta) const {
  CheckTheta(theta);
  const Vector u = layout().Get(theta, 0);
  const Matrix v = layout().Get(theta, 1);
  const Vector w = layout().Get(theta, 2);
  Matrix jac = Matrix::Zero(lifted_dim(), param_dim());
  const Eigen::Index ou = layout().offset(0);
  const Eigen::Index ov = layout().offset(1);
  const Eigen::Index ow = layout().offset(2);
  for (Eigen::Index j = 0; j < m_; ++j) {
    for (Eigen::Index i = 0; i < n_; ++i) {
      const Eigen::Index row = i + j * n_;
      jac(row, ou + i) = v(i, j) * w(j);
      jac(row, ov + row) = u(i) * w(j);
      jac(row, ow + j) = u(i) * v(i, j);
    }
  }
  return jac;
}

Vector DiagPathLift::PullBack(const Vector& theta,
                              const Vector& grad_z) const {
  CheckTheta(theta);
  if (grad_z.size() != lifted_dim()) {
    throw ShapeError("PullBack: gradient has wrong length");
  }
  const Vector u = layout().Get(theta, 0);
  const Matrix v = layout().Get(theta, 1);
  const Vector w = layout().Get(theta, 2);
  const Matrix g = Unvec(grad_z, n_, m_);
  const Matrix gv = g.cwiseProduct(v);
  Vector out(param_dim());
  out.segment(layout().offset(0), n_) = gv * w;
  out.segment(layout().offset(1), n_ * m_) =
      Vec(g.cwiseProduct(u * w.transpose()));
  out.segment(layout().offset(2), m_) = gv.transpose() * u;
  return out;
}

std::optional<Eigen::MatrixXi> DiagPathLift::MonomialExponents() const {
  Eigen::MatrixXi alpha = Eigen::MatrixXi::Zero(lifted_dim(), param_dim());
  for (Eigen::Index j = 0; j < m_; ++j) {
    for (Eigen::Index i = 0; i < n_; ++i) {
      const Eigen::Index row = i + j * n_;
      alpha(row, layout().offset(0) + i) = 1;
      alpha(row, layout().offset(1) + row) = 1;
      alpha(row, layout().offset(2) + j) = 1;
    }
  }
  return alpha;
}

// -------------------------------------------------------------- attention --

AttentionLift::AttentionLift(Eigen::Index d1, Eigen::Index dim)
    : Parametrization(ParamLayout({{"Q", d1, dim},
                                   {"K", d1, dim},
                                   {"V", d1, dim},
                                   {"O", d1, dim}}),
                      {dim, 2 * dim}),
      d1_(d1),
      dim_(dim) {}

Vector AttentionLift::Lift(const Vector& theta) const {
  CheckTheta(theta);
  const auto b = layout().Unpack(theta);
  Matrix z(dim_, 2 * dim_);
  z.leftCols(dim_) = b[0].transpose() * b[1];
  z.rightCols(dim_) = b[2].transpose() * b[3];
  return Vec(z);
}

Matrix AttentionLift::Jacobian(const Vector& theta) const {
  CheckTheta(theta);
  const auto b = layout().Unpack(theta);
  const Eigen::Index half = dim_ * dim_;
  Matrix jac = Matrix::Zero(lifted_dim(), param_dim());
  // Each half is a two-layer chain with U1 = right factor, U2 = left^T.
  for (int h = 0; h < 2; ++h) {
    const Matrix& left = b[2 * h];
    const Matrix& right = b[2 * h + 1];
    Matrix d_left(half, left.size());
    Matrix d_right(half, right.size());
    for (Eigen::Index c = 0; c < dim_; ++c) {
      for (Eigen::Index a = 0; a < d1_; ++a) {
        Matrix e = Matrix::Zero(d1_, dim_);
        e(a, c) = 1.0;
        d_left.col(a + c * d1_) = Vec(e.transpose() * right);
        d_right.col(a + c * d1_) = Vec(left.transpose() * e);
      }
    }
    jac.block(h * half, layout().offset(2 * h), half, left.size()) = d_left;
    jac.block(h * half, layout().offset(2 * h + 1), half, right.size()) =
        d_right;
  }
  return jac;
}

Matrix AttentionLift::MetricDirectional(const Vector& theta,
                                        const Vector& v) const {
  CheckTheta(theta);
  if (v.size() != theta.size()) {
    throw ShapeError("MetricDirectional: direction has wrong length");
  }
  if (v.norm() == 0.0) {
    throw std::invalid_argument("MetricDirectional: zero direction");
  }
  const auto b = layout().Unpack(theta);
  const auto db = layout().Unpack(v);
  const Eigen::Index half = dim_ * dim_;
  const Matrix eye = Identity(dim_);
  Matrix out = Matrix::Zero(lifted_dim(), lifted_dim());
  for (int h = 0; h < 2; ++h) {
    const Matrix& left = b[2 * h];
    const Matrix& right = b[2 * h + 1];
    const Matrix& dl = db[2 * h];
    const Matrix& dr = db[2 * h + 1];
    const Matrix d_outer = dl.transpose() * left + left.transpose() * dl;
    const Matrix d_inner = dr.transpose() * right + right.transpose() * dr;
    out.block(h * half, h * half, half, half) =
        Kron(eye, d_outer) + Kron(d_inner, eye);
  }
  return out;
}

// -------------------------------------------------------------- factories --

std::shared_ptr<const LinearChain> MakeLinearChain(
    std::vector<Eigen::Index> dims) {
  for (Eigen::Index d : dims) {
    if (d < 1) throw ShapeError("LinearChain: widths must be positive");
  }
  return std::make_shared<const LinearChain>(std::move(dims));
}

std::shared_ptr<const RankOneLift> MakeRankOneLift(Eigen::Index n,
                                                   Eigen::Index m,
                                                   Eigen::Index r) {
  if (n < 1 || m < 1 || r < 1) {
    throw ShapeError("RankOneLift: sizes must be positive");
  }
  return std::make_shared<const RankOneLift>(n, m, r);
}

std::shared_ptr<const DiagPathLift> MakeDiagPathLift(Eigen::Index n,
                                                     Eigen::Index m) {
  if (n < 1 || m < 1) throw ShapeError("DiagPathLift: sizes must be positive");
  return std::make_shared<const DiagPathLift>(n, m);
}

std::shared_ptr<const AttentionLift> MakeAttentionLift(Eigen::Index d1,
                                                       Eigen::Index dim) {
  if (d1 < 1 || dim < 1) {
    throw ShapeError("AttentionLift: sizes must be positive");
  }
  return std::make_shared<const AttentionLift>(d1, dim);
}

}  // namespace iflow
