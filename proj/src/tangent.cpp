// SPDX-License-Identifier: Apache-2.0
#include "fmala/tangent.hpp"

#include <stdexcept>

namespace fmala {

TangentVector sample_unit_sphere(RngStream& rng, Eigen::Index d) {
  if (d < 1) throw std::invalid_argument("sample_unit_sphere: dimension must be positive");
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::VectorXd v = rng.normal_vector(d);
    const double norm = v.norm();
    if (norm < 1e-30) continue;
    return {v / norm, true};
  }
  throw std::logic_error("sample_unit_sphere: 100 consecutive degenerate draws");
}

Eigen::VectorXd forward_gradient(double jvp, const TangentVector& v) {
  const auto d = static_cast<double>(v.size());
  return (d * jvp) * v.components;
}

EstimatorMoments estimator_moments_analytic(const Eigen::VectorXd& grad, Eigen::Index i) {
  const Eigen::Index dim = grad.size();
  if (dim < 1 || i < 0 || i >= dim) {
    throw std::out_of_range("estimator_moments_analytic: coordinate index out of range");
  }
  const auto d = static_cast<double>(dim);
  const double gi2 = grad[i] * grad[i];
  double others = 0.0;
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (j != i) others += grad[j] * grad[j];
  }
  return {grad[i] / d, (2.0 * (d - 1.0) / d * gi2 + others) / (d * (d + 2.0))};
}

}  // namespace fmala
