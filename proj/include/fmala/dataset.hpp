// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fmala {

/// Inputs (N x D_in) with either integer class labels or real targets.
struct LabeledDataset {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;  // classification, each in [0, num_classes)
  Eigen::VectorXd targets;  // regression
  int num_classes = 0;      // 0 for regression

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index input_dim() const { return inputs.cols(); }
  bool is_classification() const { return num_classes > 0; }

  /// Throws std::invalid_argument on empty data, ragged shapes or bad labels.
  void validate() const;
};

/// CSV with a header row, feature columns, then one label column. For
/// classification the label must be a non-negative integer; the class count
/// is the largest label plus one unless `num_classes` is given.
LabeledDataset load_classification_csv(const std::string& path, int num_classes = 0);
LabeledDataset load_regression_csv(const std::string& path);

/// Gaussian clusters: class means drawn N(0, separation^2 I), points drawn
/// N(mean, I), labels balanced round-robin.
LabeledDataset make_gaussian_clusters(std::uint64_t seed, Eigen::Index n, Eigen::Index input_dim,
                                      int num_classes, double separation = 1.5);

/// 1-D regression set: x uniform on [-2, 2], y = sin(2x) + noise_std * eps.
LabeledDataset make_sine_regression(std::uint64_t seed, Eigen::Index n, double noise_std = 0.025);

}  // namespace fmala
