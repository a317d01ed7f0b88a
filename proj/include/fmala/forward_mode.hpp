// SPDX-License-Identifier: Apache-2.0
//
// Whole-function forward operators: one pass of the target over dual inputs
// seeded with a tangent yields the value together with the directional first
// (and second) derivative. Nothing beyond the inputs is stored.

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "fmala/target_model.hpp"

namespace fmala {

/// Tangent direction; `unit` records that it was normalized.
struct TangentVector {
  Eigen::VectorXd components;
  bool unit = false;

  Eigen::Index size() const { return components.size(); }
};

/// Target evaluation produced a non-finite number. `coordinate` names the
/// offending input coordinate when the fault is in the input.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::optional<Eigen::Index> coordinate = std::nullopt)
      : std::runtime_error(what), coordinate_(coordinate) {}
  const std::optional<Eigen::Index>& coordinate() const { return coordinate_; }

 private:
  std::optional<Eigen::Index> coordinate_;
};

struct FirstOrder {
  double value = 0.0;
  double jvp = 0.0;
};

struct SecondOrder {
  double value = 0.0;
  double jvp = 0.0;
  double vhv = 0.0;
};

namespace detail {

inline void check_inputs(const TargetModel& target, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& v) {
  if (theta.size() != target.dimension() || v.size() != target.dimension()) {
    throw std::invalid_argument("forward evaluation: dimension mismatch for target '" +
                                target.name() + "'");
  }
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta[i])) {
      throw EvaluationError("non-finite parameter at coordinate " + std::to_string(i), i);
    }
  }
}

template <class D>
VectorX<D> seed(const Eigen::VectorXd& theta, const Eigen::VectorXd& v) {
  VectorX<D> x(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) x[i] = D::variable(theta[i], v[i]);
  return x;
}

}  // namespace detail

/// (f(theta), grad f(theta) . v) from a single first-order pass.
inline FirstOrder eval_f1(const TargetModel& target, const Eigen::VectorXd& theta,
                          const TangentVector& v) {
  detail::check_inputs(target, theta, v.components);
  const DualD out = target.log_density(detail::seed<DualD>(theta, v.components));
  if (!isfinite(out)) {
    throw EvaluationError("non-finite first-order evaluation of '" + target.name() + "'");
  }
  return {out.value, out.d1};
}

/// (f, grad f . v, v^T H v) from a single second-order pass.
inline SecondOrder eval_f2(const TargetModel& target, const Eigen::VectorXd& theta,
                           const TangentVector& v) {
  detail::check_inputs(target, theta, v.components);
  const Dual2D out = target.log_density(detail::seed<Dual2D>(theta, v.components));
  if (!isfinite(out)) {
    throw EvaluationError("non-finite second-order evaluation of '" + target.name() + "'");
  }
  return {out.value, out.d1, out.d2};
}

}  // namespace fmala
