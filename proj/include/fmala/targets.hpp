// SPDX-License-Identifier: Apache-2.0
//
// Log-density models. Every density is written once, generic over the scalar
// type (double, Dual, Dual2), and wrapped into a TargetModel by a factory.
//
// Packing conventions (flat parameter vector):
//   funnel     (theta_1 .. theta_D, w)                          size D + 1
//   logistic   W (D_in x C, column-major), then b (C)            size D_in*C + C
//   mlp        per layer: W (out x in, column-major), then b     see MlpShape

#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "fmala/dataset.hpp"
#include "fmala/target_model.hpp"

namespace fmala {

inline double scalar_value(double x) { return x; }
template <class D, class = std::enable_if_t<is_dual_v<D>>>
double scalar_value(const D& x) {
  return x.value;
}

inline constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

// ---------------------------------------------------------------------------
// Generic densities.

/// sum_i log N(theta_i | 0, sigma^2)
template <class S>
S gaussian_log_density(const VectorX<S>& theta, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_log_density: sigma must be positive");
  const auto d = static_cast<double>(theta.size());
  const double var = sigma * sigma;
  return S(-0.5 * d * (kLog2Pi + std::log(var))) - theta.squaredNorm() / (2.0 * var);
}

/// Neal's funnel: sum_i log N(theta_i | 0, exp(-w)) + log N(w | 0, 9), with
/// exp(-w) the variance of each theta_i. `p` packs (theta, w).
template <class S>
S funnel_log_density(const VectorX<S>& p) {
  using std::exp;
  const Eigen::Index dim = p.size() - 1;
  const auto d = static_cast<double>(dim);
  const S& w = p[dim];
  const S sumsq = p.head(dim).squaredNorm();
  const double normalizer = -0.5 * d * kLog2Pi - 0.5 * std::log(18.0 * std::numbers::pi);
  return S(normalizer) + (0.5 * d) * w - 0.5 * exp(w) * sumsq - w * w / 18.0;
}

/// -scale * [(a - x)^2 + b (y - x^2)^2]
template <class S>
S rosenbrock_log_density(const VectorX<S>& theta, double a, double b, double scale) {
  const S dx = S(a) - theta[0];
  const S dy = theta[1] - theta[0] * theta[0];
  return -scale * (dx * dx + b * (dy * dy));
}

/// Class logits for one datum: b_c + x . W_c.
template <class S>
void logistic_logits(const VectorX<S>& params, const LabeledDataset& data, Eigen::Index row,
                     VectorX<S>& logits) {
  const Eigen::Index d_in = data.input_dim();
  const Eigen::Index classes = data.num_classes;
  logits.resize(classes);
  for (Eigen::Index c = 0; c < classes; ++c) {
    S z = params[d_in * classes + c];
    for (Eigen::Index k = 0; k < d_in; ++k) z += data.inputs(row, k) * params[c * d_in + k];
    logits[c] = z;
  }
}

/// Multinomial logistic likelihood plus a unit Gaussian prior on every parameter.
template <class S>
S multinomial_logistic_log_posterior(const VectorX<S>& params, const LabeledDataset& data) {
  using std::exp;
  using std::log;
  const Eigen::Index classes = data.num_classes;
  if (!data.is_classification() || params.size() != data.input_dim() * classes + classes) {
    throw std::invalid_argument("multinomial_logistic_log_posterior: shape mismatch");
  }
  S total(0.0);
  VectorX<S> logits;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    logistic_logits(params, data, i, logits);
    double shift = scalar_value(logits[0]);
    for (Eigen::Index c = 1; c < classes; ++c) shift = std::max(shift, scalar_value(logits[c]));
    S norm(0.0);
    for (Eigen::Index c = 0; c < classes; ++c) norm += exp(logits[c] - shift);
    total += logits[data.labels[static_cast<std::size_t>(i)]] - (log(norm) + shift);
  }
  return total + gaussian_log_density(params, 1.0);
}

enum class Activation { kTanh, kRelu };

/// Fully connected network layout, e.g. {1, 16, 16, 1}.
struct MlpShape {
  std::vector<Eigen::Index> layers;
  Activation activation = Activation::kTanh;

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 1; l < layers.size(); ++l) n += layers[l] * layers[l - 1] + layers[l];
    return n;
  }
};

/// Network output for every input row.
template <class S>
VectorX<S> mlp_forward(const VectorX<S>& params, const MlpShape& shape, const Eigen::MatrixXd& x) {
  using std::tanh;
  if (shape.layers.size() < 2 || shape.layers.front() != x.cols() || shape.layers.back() != 1 ||
      params.size() != shape.parameter_count()) {
    throw std::invalid_argument("mlp_forward: shape mismatch");
  }
  const std::size_t depth = shape.layers.size() - 1;
  VectorX<S> out(x.rows());
  VectorX<S> h, next;
  for (Eigen::Index n = 0; n < x.rows(); ++n) {
    h = x.row(n).transpose().template cast<S>();
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < depth; ++l) {
      const Eigen::Index in = shape.layers[l];
      const Eigen::Index width = shape.layers[l + 1];
      const Eigen::Index bias = offset + width * in;
      next.resize(width);
      for (Eigen::Index j = 0; j < width; ++j) {
        S z = params[bias + j];
        for (Eigen::Index k = 0; k < in; ++k) z += params[offset + k * width + j] * h[k];
        if (l + 1 < depth) z = shape.activation == Activation::kTanh ? tanh(z) : relu(z);
        next[j] = z;
      }
      offset = bias + width;
      h.swap(next);
    }
    out[n] = h[0];
  }
  return out;
}

/// sum_n log N(y_n | nn(x_n), sigma_lik^2) + sum_d log N(theta_d | 0, sigma_prior^2)
template <class S>
S bnn_regression_log_posterior(const VectorX<S>& params, const MlpShape& shape,
                               const LabeledDataset& data, double sigma_prior, double sigma_lik) {
  if (!(sigma_prior > 0.0) || !(sigma_lik > 0.0)) {
    throw std::invalid_argument("bnn_regression_log_posterior: sigmas must be positive");
  }
  if (data.is_classification() || data.targets.size() != data.size()) {
    throw std::invalid_argument("bnn_regression_log_posterior: regression targets required");
  }
  const VectorX<S> residual = mlp_forward(params, shape, data.inputs) - data.targets.template cast<S>();
  const auto n = static_cast<double>(data.size());
  const double var = sigma_lik * sigma_lik;
  const S lik = S(-0.5 * n * (kLog2Pi + std::log(var))) - residual.squaredNorm() / (2.0 * var);
  return lik + gaussian_log_density(params, sigma_prior);
}

// ---------------------------------------------------------------------------
// Factories.

/// Isotropic N(0, sigma^2 I) in `dim` dimensions, with analytic gradient.
TargetModel make_gaussian(Eigen::Index dim, double sigma = 1.0);

/// Funnel with `latent_dim` theta coordinates plus w; marginal of w recorded.
TargetModel make_funnel(Eigen::Index latent_dim);

TargetModel make_rosenbrock(double a = 1.0, double b = 100.0, double scale = 0.05);

TargetModel make_logistic(std::shared_ptr<const LabeledDataset> data);

TargetModel make_bnn(std::shared_ptr<const LabeledDataset> data, MlpShape shape = {{1, 16, 16, 1}},
                     double sigma_prior = 0.1, double sigma_lik = 0.025);

/// Softmax class probabilities (N x C) under logistic parameters.
Eigen::MatrixXd logistic_predict_proba(const Eigen::VectorXd& params, const LabeledDataset& data);

/// Exact gradient: analytic when available, else one first-order pass per
/// basis tangent.
Eigen::VectorXd full_gradient(const TargetModel& target, const Eigen::VectorXd& theta);

struct ValueAndGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// One plain evaluation plus full_gradient.
ValueAndGradient value_and_gradient(const TargetModel& target, const Eigen::VectorXd& theta);

}  // namespace fmala
