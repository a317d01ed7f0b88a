// SPDX-License-Identifier: Apache-2.0
#include "fmala/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fmala/rng.hpp"

namespace fmala {
namespace {

std::vector<std::vector<double>> read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset '" + path + "' is empty");
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": ragged row");
    }
    if (row.size() < 2) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": need at least one feature and a label");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("dataset '" + path + "' has no rows");
  return rows;
}

Eigen::MatrixXd features(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size() - 1);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows[i][j];
  return x;
}

}  // namespace

void LabeledDataset::validate() const {
  if (inputs.rows() < 1 || inputs.cols() < 1) throw std::invalid_argument("dataset: no data");
  if (is_classification()) {
    if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
      throw std::invalid_argument("dataset: label count does not match input rows");
    }
    for (int y : labels) {
      if (y < 0 || y >= num_classes) throw std::invalid_argument("dataset: class label out of range");
    }
  } else if (targets.size() != inputs.rows()) {
    throw std::invalid_argument("dataset: target count does not match input rows");
  }
}

LabeledDataset load_classification_csv(const std::string& path, int num_classes) {
  const auto rows = read_numeric_csv(path);
  LabeledDataset data;
  data.inputs = features(rows);
  int max_label = 0;
  for (const auto& row : rows) {
    const double y = row.back();
    if (y < 0 || std::floor(y) != y) {
      throw std::invalid_argument(path + ": class label must be a non-negative integer");
    }
    data.labels.push_back(static_cast<int>(y));
    max_label = std::max(max_label, data.labels.back());
  }
  data.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  data.validate();
  return data;
}

LabeledDataset load_regression_csv(const std::string& path) {
  const auto rows = read_numeric_csv(path);
  LabeledDataset data;
  data.inputs = features(rows);
  data.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) data.targets[static_cast<Eigen::Index>(i)] = rows[i].back();
  data.validate();
  return data;
}

LabeledDataset make_gaussian_clusters(std::uint64_t seed, Eigen::Index n, Eigen::Index input_dim,
                                      int num_classes, double separation) {
  if (n < 1 || input_dim < 1 || num_classes < 2) {
    throw std::invalid_argument("make_gaussian_clusters: need n >= 1, input_dim >= 1, classes >= 2");
  }
  RngStream rng(seed, {0, StreamPurpose::kData});
  Eigen::MatrixXd means(num_classes, input_dim);
  for (Eigen::Index c = 0; c < num_classes; ++c)
    for (Eigen::Index j = 0; j < input_dim; ++j) means(c, j) = separation * rng.normal();
  LabeledDataset data;
  data.num_classes = num_classes;
  data.inputs.resize(n, input_dim);
  data.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % num_classes);
    data.labels[static_cast<std::size_t>(i)] = c;
    for (Eigen::Index j = 0; j < input_dim; ++j) data.inputs(i, j) = means(c, j) + rng.normal();
  }
  return data;
}

LabeledDataset make_sine_regression(std::uint64_t seed, Eigen::Index n, double noise_std) {
  if (n < 1) throw std::invalid_argument("make_sine_regression: need n >= 1");
  RngStream rng(seed, {1, StreamPurpose::kData});
  LabeledDataset data;
  data.inputs.resize(n, 1);
  data.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = -2.0 + 4.0 * rng.uniform();
    data.inputs(i, 0) = x;
    data.targets[i] = std::sin(2.0 * x) + noise_std * rng.normal();
  }
  return data;
}

}  // namespace fmala
