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

#include "iflow/flows.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "iflow/errors.h"

namespace iflow {
namespace {

bool Finite(const Vector& x) { return x.allFinite(); }

Vector Step(const VectorField& f, const Vector& x, double h, Scheme scheme) {
  if (scheme == Scheme::kEuler) return x + h * f(x);
  const Vector k1 = f(x);
  const Vector k2 = f(x + 0.5 * h * k1);
  const Vector k3 = f(x + 0.5 * h * k2);
  const Vector k4 = f(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Trajectory Integrate(const VectorField& field, const Vector& x0,
                     double t_final, double dt, Scheme scheme,
                     int record_every) {
  if (!(dt > 0.0) || !(t_final > 0.0)) {
    throw std::invalid_argument("Integrate: dt and t_final must be positive");
  }
  if (record_every < 1) {
    throw std::invalid_argument("Integrate: record_every must be >= 1");
  }
  if (!Finite(x0)) throw NumericalError("Integrate: non-finite initial state");
  const long steps =
      std::max(1L, static_cast<long>(std::ceil(t_final / dt - 1e-9)));
  Trajectory out;
  out.times.push_back(0.0);
  out.states.push_back(x0);
  Vector x = x0;
  double t = 0.0;
  for (long k = 1; k <= steps; ++k) {
    const double t_next = k == steps ? t_final : k * dt;
    Vector next;
    std::string failure = "non-finite state";
    try {
      next = Step(field, x, t_next - t, scheme);
    } catch (const NumericalError& e) {
      failure = e.what();
      next = Vector::Constant(x.size(), std::nan(""));
    }
    if (!Finite(next)) {
      if (out.times.back() != t) {
        out.times.push_back(t);
        out.states.push_back(x);
      }
      out.blew_up = true;
      out.failure = failure;
      out.last_valid_time = t;
      return out;
    }
    x = std::move(next);
    t = t_next;
    if (k % record_every == 0 || k == steps) {
      out.times.push_back(t);
      out.states.push_back(x);
    }
  }
  out.last_valid_time = t;
  return out;
}

VectorField ParamGradientField(const Parametrization& model,
                               const Objective& obj) {
  if (!(obj.shape() == model.lift_shape())) {
    throw ShapeError("ParamGradientField: objective and lifting shapes differ");
  }
  return [&model, &obj](const Vector& theta) -> Vector {
    return -model.PullBack(theta, obj.Gradient(model.Lift(theta)));
  };
}

Trajectory ParamGradientFlow(const Parametrization& model,
                             const Objective& obj, const Vector& theta0,
                             double t_final, double dt, int record_every) {
  if (theta0.size() != model.param_dim()) {
    throw ShapeError("ParamGradientFlow: initial parameter has wrong length");
  }
  return Integrate(ParamGradientField(model, obj), theta0, t_final, dt,
                   Scheme::kRk4, record_every);
}

Trajectory LiftTrajectory(const Parametrization& model, const Trajectory& t) {
  Trajectory out;
  out.times = t.times;
  out.blew_up = t.blew_up;
  out.failure = t.failure;
  out.last_valid_time = t.last_valid_time;
  out.states.reserve(t.states.size());
  for (const Vector& theta : t.states) out.states.push_back(model.Lift(theta));
  return out;
}

std::vector<double> TrajectoryErrorSeries(const Trajectory& a,
                                          const Trajectory& b) {
  std::vector<double> out;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    const double t = a.times[i];
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    while (j < b.times.size() && b.times[j] < t - tol) ++j;
    if (j == b.times.size()) break;
    if (std::abs(b.times[j] - t) > tol) continue;
    if (a.states[i].size() != b.states[j].size()) {
      throw ShapeError("TrajectoryCompare: state sizes differ");
    }
    out.push_back((a.states[i] - b.states[j]).norm() /
                  (1.0 + a.states[i].norm()));
  }
  if (out.empty()) {
    throw std::invalid_argument("TrajectoryCompare: no common sample times");
  }
  return out;
}

double TrajectoryCompare(const Trajectory& a, const Trajectory& b) {
  const auto series = TrajectoryErrorSeries(a, b);
  return *std::max_element(series.begin(), series.end());
}

double ScalarMetric(const Matrix& s, double z) {
  if (s.rows() != s.cols()) throw ShapeError("ScalarMetric: S must be square");
  const double tr = s.trace();
  const double tr2 = (s * s).trace();
  const double rad = 2.0 * tr2 - tr * tr + 4.0 * z * z;
  if (rad < -1e-12) {
    std::ostringstream os;
    os << "ScalarMetric: negative radicand " << rad;
    throw NumericalError(os.str());
  }
  return std::sqrt(std::max(rad, 0.0));
}

double ScalarMetric(double lambda, double z) {
  return std::sqrt(lambda * lambda + 4.0 * z * z);
}

IntrinsicRhs ScalarIntrinsic(const Matrix& s) {
  return [s](const Matrix& z, const Matrix& g) -> Matrix {
    if (z.size() != 1) throw ShapeError("ScalarIntrinsic: z must be 1 x 1");
    return -ScalarMetric(s, z(0, 0)) * g;
  };
}

Trajectory IntrinsicFlow(const IntrinsicRhs& rhs, const Objective& obj,
                         const Vector& z0, double t_final, double dt,
                         int record_every) {
  const LiftShape shape = obj.shape();
  if (z0.size() != shape.size()) {
    throw ShapeError("IntrinsicFlow: initial point has wrong length");
  }
  auto field = [&rhs, &obj, shape](const Vector& z) -> Vector {
    const Matrix zm = Unvec(z, shape.rows, shape.cols);
    const Matrix g = Unvec(obj.Gradient(z), shape.rows, shape.cols);
    return Vec(rhs(zm, g));
  };
  return Integrate(field, z0, t_final, dt, Scheme::kRk4, record_every);
}

}  // namespace iflow
