// SPDX-License-Identifier: Apache-2.0
#include "fmala/targets.hpp"

#include <string>

#include "fmala/forward_mode.hpp"

namespace fmala {

TargetModel make_gaussian(Eigen::Index dim, double sigma) {
  if (dim < 1) throw std::invalid_argument("make_gaussian: dimension must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("make_gaussian: sigma must be positive");
  return TargetModel(
      "gaussian", dim, [sigma](const auto& theta) { return gaussian_log_density(theta, sigma); },
      [sigma](const Eigen::VectorXd& theta) -> Eigen::VectorXd { return -theta / (sigma * sigma); });
}

TargetModel make_funnel(Eigen::Index latent_dim) {
  if (latent_dim < 1) throw std::invalid_argument("make_funnel: latent dimension must be positive");
  TargetModel target(
      "funnel" + std::to_string(latent_dim), latent_dim + 1,
      [](const auto& p) { return funnel_log_density(p); },
      [latent_dim](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        const double w = p[latent_dim];
        const double ew = std::exp(w);
        Eigen::VectorXd g(p.size());
        g.head(latent_dim) = -ew * p.head(latent_dim);
        g[latent_dim] = 0.5 * static_cast<double>(latent_dim) - 0.5 * ew * p.head(latent_dim).squaredNorm() -
                        w / 9.0;
        return g;
      });
  target.with_marginal({latent_dim, 0.0, 9.0});
  return target;
}

TargetModel make_rosenbrock(double a, double b, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("make_rosenbrock: scale must be positive");
  return TargetModel(
      "rosenbrock", 2, [a, b, scale](const auto& theta) { return rosenbrock_log_density(theta, a, b, scale); },
      [a, b, scale](const Eigen::VectorXd& t) -> Eigen::VectorXd {
        const double dy = t[1] - t[0] * t[0];
        Eigen::VectorXd g(2);
        g[0] = scale * (2.0 * (a - t[0]) + 4.0 * b * t[0] * dy);
        g[1] = -scale * 2.0 * b * dy;
        return g;
      });
}

Eigen::MatrixXd logistic_predict_proba(const Eigen::VectorXd& params, const LabeledDataset& data) {
  const Eigen::Index classes = data.num_classes;
  if (!data.is_classification() || params.size() != data.input_dim() * classes + classes) {
    throw std::invalid_argument("logistic_predict_proba: shape mismatch");
  }
  Eigen::MatrixXd probs(data.size(), classes);
  Eigen::VectorXd logits;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    logistic_logits(params, data, i, logits);
    const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
    probs.row(i) = (e / e.sum()).transpose();
  }
  return probs;
}

TargetModel make_logistic(std::shared_ptr<const LabeledDataset> data) {
  if (!data || !data->is_classification()) {
    throw std::invalid_argument("make_logistic: classification dataset required");
  }
  data->validate();
  const Eigen::Index d_in = data->input_dim();
  const Eigen::Index classes = data->num_classes;
  return TargetModel(
      "logistic", d_in * classes + classes,
      [data](const auto& params) { return multinomial_logistic_log_posterior(params, *data); },
      [data, d_in, classes](const Eigen::VectorXd& params) -> Eigen::VectorXd {
        Eigen::MatrixXd residual = -logistic_predict_proba(params, *data);
        for (Eigen::Index i = 0; i < data->size(); ++i) residual(i, data->labels[static_cast<std::size_t>(i)]) += 1.0;
        Eigen::VectorXd g = -params;
        Eigen::Map<Eigen::MatrixXd>(g.data(), d_in, classes) += data->inputs.transpose() * residual;
        g.tail(classes) += residual.colwise().sum().transpose();
        return g;
      });
}

TargetModel make_bnn(std::shared_ptr<const LabeledDataset> data, MlpShape shape, double sigma_prior,
                     double sigma_lik) {
  if (!data || data->is_classification()) throw std::invalid_argument("make_bnn: regression dataset required");
  data->validate();
  if (shape.layers.size() < 2 || shape.layers.front() != data->input_dim() || shape.layers.back() != 1) {
    throw std::invalid_argument("make_bnn: layer sizes do not match the dataset");
  }
  if (!(sigma_prior > 0.0) || !(sigma_lik > 0.0)) throw std::invalid_argument("make_bnn: sigmas must be positive");
  const Eigen::Index dim = shape.parameter_count();
  return TargetModel("bnn", dim, [data, shape, sigma_prior, sigma_lik](const auto& params) {
    return bnn_regression_log_posterior(params, shape, *data, sigma_prior, sigma_lik);
  });
}

Eigen::VectorXd full_gradient(const TargetModel& target, const Eigen::VectorXd& theta) {
  if (target.has_analytic_gradient()) {
    if (theta.size() != target.dimension()) throw std::invalid_argument("full_gradient: dimension mismatch");
    return target.analytic_gradient(theta);
  }
  const Eigen::Index dim = target.dimension();
  Eigen::VectorXd grad(dim);
  TangentVector basis{Eigen::VectorXd::Zero(dim), true};
  for (Eigen::Index i = 0; i < dim; ++i) {
    basis.components[i] = 1.0;
    grad[i] = eval_f1(target, theta, basis).jvp;
    basis.components[i] = 0.0;
  }
  return grad;
}

ValueAndGradient value_and_gradient(const TargetModel& target, const Eigen::VectorXd& theta) {
  ValueAndGradient out;
  out.value = target.log_density(theta);
  if (!std::isfinite(out.value)) throw EvaluationError("non-finite log-density of '" + target.name() + "'");
  out.gradient = full_gradient(target, theta);
  if (!out.gradient.allFinite()) throw EvaluationError("non-finite gradient of '" + target.name() + "'");
  return out;
}

}  // namespace fmala
