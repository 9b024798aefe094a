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

// Liftings phi: R^D -> R^d that factorize a loss as l(theta) = f(phi(theta)),
// with their Jacobians and the metric M(theta) = dphi dphi^T.

#ifndef IFLOW_MODELS_H_
#define IFLOW_MODELS_H_

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iflow/linalg.h"

namespace iflow {

struct Block {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

// Maps a flat parameter vector onto named matrix blocks. Each block is stored
// column-major in its segment of the flat vector.
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(std::vector<Block> blocks);

  Eigen::Index size() const { return size_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t num_blocks() const { return blocks_.size(); }
  Eigen::Index offset(std::size_t i) const { return offsets_.at(i); }
  std::size_t IndexOf(const std::string& name) const;

  Matrix Get(const Vector& flat, std::size_t i) const;
  void Set(Vector& flat, std::size_t i, const Matrix& value) const;
  std::vector<Matrix> Unpack(const Vector& flat) const;
  Vector Pack(const std::vector<Matrix>& blocks) const;

 private:
  std::vector<Block> blocks_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index size_ = 0;
};

struct ParamPoint {
  Vector flat;
  ParamLayout layout;

  Matrix block(std::size_t i) const { return layout.Get(flat, i); }
  Matrix block(const std::string& name) const {
    return layout.Get(flat, layout.IndexOf(name));
  }
};

// Matrix view of the lifted vector: z = vec(Z) with Z rows x cols.
struct LiftShape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  bool operator==(const LiftShape&) const = default;
};

class Parametrization {
 public:
  virtual ~Parametrization() = default;

  virtual std::string kind() const = 0;
  const ParamLayout& layout() const { return layout_; }
  Eigen::Index param_dim() const { return layout_.size(); }
  Eigen::Index lifted_dim() const { return shape_.size(); }
  const LiftShape& lift_shape() const { return shape_; }

  virtual Vector Lift(const Vector& theta) const = 0;
  // d x D.
  virtual Matrix Jacobian(const Vector& theta) const = 0;
  virtual Matrix Metric(const Vector& theta) const;
  // Directional derivative of theta -> M(theta) along v. The base class uses
  // a central difference with step 1e-5 (1 + |theta|) / |v|.
  virtual Matrix MetricDirectional(const Vector& theta, const Vector& v) const;
  // dphi(theta)^T g: the parameter gradient of f o phi given g = grad f(z).
  virtual Vector PullBack(const Vector& theta, const Vector& grad_z) const;
  // Exponent matrix when every coordinate of phi is a single monomial.
  virtual std::optional<Eigen::MatrixXi> MonomialExponents() const {
    return std::nullopt;
  }

  ParamPoint Point(Vector flat) const;

 protected:
  Parametrization(ParamLayout layout, LiftShape shape)
      : layout_(std::move(layout)), shape_(shape) {}

  void CheckTheta(const Vector& theta) const;

 private:
  ParamLayout layout_;
  LiftShape shape_;
};

using ParametrizationPtr = std::shared_ptr<const Parametrization>;

// theta = (U_1, ..., U_L) with U_j of shape n_j x n_{j-1};
// phi(theta) = vec(U_L ... U_1).
class LinearChain final : public Parametrization {
 public:
  explicit LinearChain(std::vector<Eigen::Index> dims);

  std::string kind() const override { return "linear_chain"; }
  const std::vector<Eigen::Index>& dims() const { return dims_; }
  int depth() const { return static_cast<int>(dims_.size()) - 1; }

  Vector Lift(const Vector& theta) const override;
  Matrix Jacobian(const Vector& theta) const override;
  Matrix Metric(const Vector& theta) const override;
  // Analytic for depth 2, finite differences otherwise.
  Matrix MetricDirectional(const Vector& theta,
                           const Vector& v) const override;
  Vector PullBack(const Vector& theta, const Vector& grad_z) const override;
  std::optional<Eigen::MatrixXi> MonomialExponents() const override;

  std::vector<Matrix> Layers(const Vector& theta) const;
  Vector Pack(const std::vector<Matrix>& layers) const;
  Matrix Product(const Vector& theta) const;

  // (S_j, T_j) for j = 1..L with S_j = U_L..U_{j+1} (U_L..U_{j+1})^T and
  // T_j = (U_{j-1}..U_1)^T U_{j-1}..U_1, so that M vec(X) = vec(sum S_j X T_j).
  std::vector<std::pair<Matrix, Matrix>> GradSumFactors(
      const Vector& theta) const;

 private:
  std::vector<Eigen::Index> dims_;
};

// theta = (U, V) with U = (u_1..u_r) in R^{n x r}, V = (v_1..v_r) in R^{m x r};
// column j of the lifted (nm x r) matrix is vec(u_j v_j^T).
class RankOneLift final : public Parametrization {
 public:
  RankOneLift(Eigen::Index n, Eigen::Index m, Eigen::Index r);

  std::string kind() const override { return "rank_one"; }
  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }
  Eigen::Index r() const { return r_; }

  Vector Lift(const Vector& theta) const override;
  Matrix Jacobian(const Vector& theta) const override;
  std::optional<Eigen::MatrixXi> MonomialExponents() const override;

 private:
  Eigen::Index n_, m_, r_;
};

// theta = (u, V, w); Z = diag(u) V diag(w) in R^{n x m}.
class DiagPathLift final : public Parametrization {
 public:
  DiagPathLift(Eigen::Index n, Eigen::Index m);

  std::string kind() const override { return "diag_path"; }
  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }

  Vector Lift(const Vector& theta) const override;
  Matrix Jacobian(const Vector& theta) const override;
  Vector PullBack(const Vector& theta, const Vector& grad_z) const override;
  std::optional<Eigen::MatrixXi> MonomialExponents() const override;

 private:
  Eigen::Index n_, m_;
};

// theta = (Q, K, V, O), each d1 x dim; lifted matrix [Q^T K | V^T O] of shape
// dim x 2 dim.
class AttentionLift final : public Parametrization {
 public:
  AttentionLift(Eigen::Index d1, Eigen::Index dim);

  std::string kind() const override { return "attention"; }
  Eigen::Index d1() const { return d1_; }
  Eigen::Index dim() const { return dim_; }

  Vector Lift(const Vector& theta) const override;
  Matrix Jacobian(const Vector& theta) const override;
  Matrix MetricDirectional(const Vector& theta,
                           const Vector& v) const override;

 private:
  Eigen::Index d1_, dim_;
};

std::shared_ptr<const LinearChain> MakeLinearChain(
    std::vector<Eigen::Index> dims);
std::shared_ptr<const RankOneLift> MakeRankOneLift(Eigen::Index n,
                                                   Eigen::Index m,
                                                   Eigen::Index r);
std::shared_ptr<const DiagPathLift> MakeDiagPathLift(Eigen::Index n,
                                                     Eigen::Index m);
std::shared_ptr<const AttentionLift> MakeAttentionLift(Eigen::Index d1,
                                                       Eigen::Index dim);

// phi_i(theta) = prod_l theta_l^{alpha_il}. Every column of the exponent
// matrix must carry a single shared nonzero exponent.
class MonomialLifting {
 public:
  explicit MonomialLifting(Eigen::MatrixXi exponents);

  Eigen::Index lifted_dim() const { return exponents_.rows(); }
  Eigen::Index param_dim() const { return exponents_.cols(); }
  const Eigen::MatrixXi& exponents() const { return exponents_; }

  double Evaluate(Eigen::Index i, const Vector& theta) const;
  Vector Evaluate(const Vector& theta) const;

  struct GradHess {
    Vector gradient;
    Matrix hessian;
  };
  // Closed form; throws NumericalError when a support coordinate is zero.
  GradHess GradientHessian(Eigen::Index i, const Vector& theta) const;
  Vector Gradient(Eigen::Index i, const Vector& theta) const;

 private:
  void CheckIndex(Eigen::Index i) const;
  void CheckSupport(Eigen::Index i, const Vector& theta) const;

  Eigen::MatrixXi exponents_;
};

// Throws std::invalid_argument for liftings whose coordinates are not single
// monomials (e.g. a linear chain with an inner width above one).
MonomialLifting AsMonomial(const Parametrization& p);

}  // namespace iflow

#endif  // IFLOW_MODELS_H_
