// SPDX-License-Identifier: Apache-2.0
//
// Tangent directions on the unit sphere and the forward-gradient estimator
// g_hat = (grad f . v_hat) v_hat built from them.

#pragma once

#include <utility>

#include <Eigen/Core>

#include "fmala/forward_mode.hpp"
#include "fmala/rng.hpp"

namespace fmala {

/// Uniform draw from S^{d-1}: a normalized standard-normal vector.
/// Degenerate draws (norm below 1e-30) are redrawn, at most 100 times.
TangentVector sample_unit_sphere(RngStream& rng, Eigen::Index d);

/// Unbiased forward gradient D * jvp * v_hat.
Eigen::VectorXd forward_gradient(double jvp, const TangentVector& v);

struct EstimatorMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Closed-form mean and variance of coordinate `i` of the unscaled estimator
/// (grad . v_hat) v_hat with v_hat uniform on the sphere:
///   mean = g_i / D
///   var  = (2 (D-1)/D g_i^2 + sum_{j != i} g_j^2) / (D (D+2))
EstimatorMoments estimator_moments_analytic(const Eigen::VectorXd& grad, Eigen::Index i);

}  // namespace fmala
