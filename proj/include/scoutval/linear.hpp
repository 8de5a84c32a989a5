/*
 * Copyright 2026 The scoutval Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Least-squares linear baseline and the train-fitted standardizer it uses.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "scoutval/common.hpp"
#include "scoutval/matrix.hpp"

namespace scoutval {

// Column-wise (x - mean) / std with statistics from the training matrix.
// Constant columns keep scale 1 and therefore map to 0.
struct Standardizer {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    s.names = x.names();
    s.mean.assign(x.cols(), 0.0);
    s.scale.assign(x.cols(), 1.0);
    const auto n = static_cast<double>(x.rows());
    if (x.rows() == 0) return s;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) sum += x(i, j);
      const double mu = sum / n;
      double ss = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) ss += (x(i, j) - mu) * (x(i, j) - mu);
      const double sd = x.rows() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      s.mean[j] = mu;
      s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    if (x.names() != names) throw DomainError("standardizer column mismatch");
    Matrix out(names, x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean[j]) / scale[j];
    }
    return out;
  }
};

struct LinearModel {
  std::vector<std::string> names;
  std::vector<double> weights;
  double intercept = 0.0;

  double predict(std::span<const double> x) const {
    double s = intercept;
    for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * x[j];
    return s;
  }
  std::vector<double> predict_all(const Matrix& x) const {
    if (x.names() != names) throw DomainError("linear model column mismatch");
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
    return out;
  }
};

inline constexpr double kRidgeJitter = 1e-8;

// Weighted least squares through centered normal equations with a small
// ridge term on the diagonal. Empty `weights` means unit weights.
inline LinearModel fit_linear(const Matrix& x, std::span<const double> y,
                              std::span<const double> weights = {}) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0) throw DomainError("fit_linear on an empty matrix");
  if (y.size() != n) throw DomainError("target length does not match matrix rows");
  if (!weights.empty() && weights.size() != n) throw DomainError("weight length mismatch");
  if (n < d + 1) throw DomainError("fit_linear needs more rows than columns");
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  double w_sum = 0.0, y_mean = 0.0;
  Eigen::VectorXd x_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    w_sum += w(i);
    y_mean += w(i) * y[i];
    for (std::size_t j = 0; j < d; ++j) x_mean(static_cast<Eigen::Index>(j)) += w(i) * x(i, j);
  }
  if (!(w_sum > 0.0)) throw DomainError("weights sum to zero");
  y_mean /= w_sum;
  x_mean /= w_sum;

  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(dd, dd);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(dd);
  Eigen::VectorXd row(dd);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      row(static_cast<Eigen::Index>(j)) = x(i, j) - x_mean(static_cast<Eigen::Index>(j));
    }
    xtx.selfadjointView<Eigen::Lower>().rankUpdate(row, w(i));
    xty += w(i) * (y[i] - y_mean) * row;
  }
  xtx = xtx.selfadjointView<Eigen::Lower>();
  xtx.diagonal().array() += kRidgeJitter;

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw DomainError("linear system is singular");
  }
  const Eigen::VectorXd beta = ldlt.solve(xty);
  if (!beta.allFinite()) throw DomainError("linear system is singular");

  LinearModel m;
  m.names = x.names();
  m.weights.assign(beta.data(), beta.data() + beta.size());
  m.intercept = y_mean - x_mean.dot(beta);
  return m;
}

inline double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline constexpr double kLogisticL2 = 1e-4;

// Weighted logistic regression by Newton iterations (IRLS) with a light L2
// penalty on the slopes so separable data still converges. The returned
// model's predict() gives the log-odds.
inline LinearModel fit_logistic(const Matrix& x, std::span<const char> labels,
                                std::span<const double> weights = {}, int max_iter = 50) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0) throw DomainError("fit_logistic on an empty matrix");
  if (labels.size() != n) throw DomainError("label length does not match matrix rows");
  if (!weights.empty() && weights.size() != n) throw DomainError("weight length mismatch");
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  const auto p = static_cast<Eigen::Index>(d + 1);  // slot 0 is the intercept
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd row(p);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    for (std::size_t i = 0; i < n; ++i) {
      row(0) = 1.0;
      for (std::size_t j = 0; j < d; ++j) row(static_cast<Eigen::Index>(j + 1)) = x(i, j);
      const double mu = logistic(row.dot(beta));
      const double y = labels[i] ? 1.0 : 0.0;
      grad += w(i) * (y - mu) * row;
      hess.selfadjointView<Eigen::Lower>().rankUpdate(row, w(i) * std::max(mu * (1.0 - mu), 1e-12));
    }
    hess = hess.selfadjointView<Eigen::Lower>();
    for (Eigen::Index j = 1; j < p; ++j) {
      grad(j) -= kLogisticL2 * beta(j);
      hess(j, j) += kLogisticL2;
    }
    hess(0, 0) += kRidgeJitter;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) throw DomainError("logistic regression diverged");
    beta += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  LinearModel m;
  m.names = x.names();
  m.intercept = beta(0);
  m.weights.assign(beta.data() + 1, beta.data() + p);
  return m;
}

// Standardize-then-fit pipeline for the linear baseline.
struct LinearPipeline {
  Standardizer standardizer;
  LinearModel model;

  static LinearPipeline fit(const Matrix& x, std::span<const double> y,
                            std::span<const double> weights = {}) {
    LinearPipeline p;
    p.standardizer = Standardizer::fit(x);
    p.model = fit_linear(p.standardizer.apply(x), y, weights);
    return p;
  }
  std::vector<double> predict_all(const Matrix& x) const {
    return model.predict_all(standardizer.apply(x));
  }
};

}  // namespace scoutval
