// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>

#include <Eigen/Core>

#include "fmala/dual.hpp"

namespace fmala {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using DualD = Dual<double>;
using Dual2D = Dual2<double>;

/// Known Gaussian marginal of one packed coordinate, used for the KL metric.
struct MarginalInfo {
  Eigen::Index index = 0;
  double mean = 0.0;
  double variance = 1.0;
};

/// Per-kind evaluation counts; attach with TargetModel::instrumented().
struct EvalCounters {
  std::atomic<long> plain{0};
  std::atomic<long> first_order{0};
  std::atomic<long> second_order{0};
  std::atomic<long> gradient{0};

  long forward_total() const { return first_order + second_order; }
  void reset() {
    plain = 0;
    first_order = 0;
    second_order = 0;
    gradient = 0;
  }
};

/// A log-density over a flat parameter vector, callable on double, Dual and
/// Dual2 inputs. Immutable after construction, safe to share across chains.
class TargetModel {
 public:
  using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  /// `model` must be callable as `model(const VectorX<S>&) -> S` for
  /// S in {double, DualD, Dual2D}; a generic lambda is the usual choice.
  template <class Model>
  TargetModel(std::string name, Eigen::Index dimension, Model model,
              GradientFn analytic_gradient = {})
      : name_(std::move(name)), dimension_(dimension), gradient_(std::move(analytic_gradient)) {
    auto shared = std::make_shared<const Model>(std::move(model));
    plain_ = [shared](const VectorX<double>& x) { return (*shared)(x); };
    first_ = [shared](const VectorX<DualD>& x) { return (*shared)(x); };
    second_ = [shared](const VectorX<Dual2D>& x) { return (*shared)(x); };
  }

  const std::string& name() const { return name_; }
  Eigen::Index dimension() const { return dimension_; }

  double log_density(const VectorX<double>& x) const {
    count(&EvalCounters::plain);
    return plain_(x);
  }
  // Plain-double expressions such as VectorXd::Zero(n) resolve here.
  template <class Derived>
    requires std::is_same_v<typename Derived::Scalar, double>
  double log_density(const Eigen::MatrixBase<Derived>& x) const {
    return log_density(VectorX<double>(x));
  }
  DualD log_density(const VectorX<DualD>& x) const {
    count(&EvalCounters::first_order);
    return first_(x);
  }
  Dual2D log_density(const VectorX<Dual2D>& x) const {
    count(&EvalCounters::second_order);
    return second_(x);
  }

  bool has_analytic_gradient() const { return static_cast<bool>(gradient_); }
  Eigen::VectorXd analytic_gradient(const Eigen::VectorXd& x) const {
    count(&EvalCounters::gradient);
    return gradient_(x);
  }

  const std::optional<MarginalInfo>& marginal() const { return marginal_; }
  TargetModel& with_marginal(MarginalInfo info) {
    marginal_ = info;
    return *this;
  }

  /// Copy of this model that bumps `counters` on every evaluation.
  TargetModel instrumented(std::shared_ptr<EvalCounters> counters) const {
    TargetModel copy = *this;
    copy.counters_ = std::move(counters);
    return copy;
  }

  TargetModel without_analytic_gradient() const {
    TargetModel copy = *this;
    copy.gradient_ = {};
    return copy;
  }

 private:
  void count(std::atomic<long> EvalCounters::*field) const {
    if (counters_) ((*counters_).*field).fetch_add(1, std::memory_order_relaxed);
  }

  std::string name_;
  Eigen::Index dimension_;
  std::function<double(const VectorX<double>&)> plain_;
  std::function<DualD(const VectorX<DualD>&)> first_;
  std::function<Dual2D(const VectorX<Dual2D>&)> second_;
  GradientFn gradient_;
  std::optional<MarginalInfo> marginal_;
  std::shared_ptr<EvalCounters> counters_;
};

}  // namespace fmala
