/*
 * Copyright 2026 The Phalanx Authors.
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
#include "phalanx/logistic.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phalanx/error.hpp"
#include "phalanx/util.hpp"

namespace phalanx {

bool FittedModel::any_pinned() const {
  return std::any_of(pinned.begin(), pinned.end(), [](std::uint8_t p) { return p != 0; });
}

namespace {

double sigmoid(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

void check_variables(const BlockedDataset& ds, const std::vector<int>& variables) {
  if (variables.empty()) throw ValidationError("variable list is empty");
  for (int v : variables) {
    if (v < 0 || v >= ds.d_vars()) {
      throw ValidationError("variable index " + std::to_string(v) + " out of range [0, " +
                            std::to_string(ds.d_vars()) + ")");
    }
  }
}

}  // namespace

FittedModel fit_logistic(const BlockedDataset& ds, const std::vector<int>& variables,
                         double ridge) {
  std::vector<int> all(static_cast<std::size_t>(ds.n_cases()));
  std::iota(all.begin(), all.end(), 0);
  return fit_logistic_rows(ds, all, variables, ridge);
}

FittedModel fit_logistic_rows(const BlockedDataset& ds, std::span<const int> rows,
                              const std::vector<int>& variables, double ridge) {
  check_variables(ds, variables);
  if (rows.empty()) throw ValidationError("fit requires at least one row");
  if (ridge < 0.0) throw ValidationError("ridge must be nonnegative");
  const auto& y_all = ds.labels();

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(variables.size());

  Eigen::MatrixXd x(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < k; ++j) {
      x(i, j) = ds.features()(row, static_cast<Eigen::Index>(variables[static_cast<std::size_t>(j)]));
    }
    y(i) = y_all[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
  }

  FittedModel model;
  model.variables = variables;
  model.coefficients.assign(variables.size(), 0.0);
  model.pinned.assign(variables.size(), 0);

  // Constant columns duplicate the intercept: exclude them from the solve
  // and leave their coefficients at zero.
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (x.col(j).maxCoeff() == x.col(j).minCoeff()) {
      model.pinned[static_cast<std::size_t>(j)] = 1;
    } else {
      active.push_back(j);
    }
  }
  const auto ka = static_cast<Eigen::Index>(active.size());

  Eigen::MatrixXd design(n, 1 + ka);
  design.col(0).setOnes();
  for (Eigen::Index j = 0; j < ka; ++j) design.col(1 + j) = x.col(active[static_cast<std::size_t>(j)]);

  const bool penalize = ridge > 0.0 && ka > 0;
  const Eigen::Index n_aug = penalize ? n + ka : n;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_aug, 1 + ka);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_aug);
  if (penalize) {
    const double root_ridge = std::sqrt(ridge);
    for (Eigen::Index j = 0; j < ka; ++j) a(n + j, 1 + j) = root_ridge;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(1 + ka);
  for (int iter = 1; iter <= kIrlsMaxIter; ++iter) {
    model.iterations = iter;
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd pi(n), w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      pi(i) = sigmoid(eta(i));
      w(i) = std::max(pi(i) * (1.0 - pi(i)), kIrlsWeightFloor);
      z(i) = eta(i) + (y(i) - pi(i)) / w(i);
    }
    const Eigen::VectorXd sw = w.array().sqrt();
    a.topRows(n) = sw.asDiagonal() * design;
    b.head(n) = sw.array() * z.array();

    const Eigen::VectorXd beta_new = a.colPivHouseholderQr().solve(b);
    if (!beta_new.allFinite()) {
      throw NumericalError("logistic fit produced non-finite coefficients");
    }
    const double delta = (beta_new - beta).cwiseAbs().maxCoeff();
    beta = beta_new;
    if (delta < kIrlsTol) {
      model.converged = true;
      break;
    }
  }

  model.intercept = beta(0);
  for (Eigen::Index j = 0; j < ka; ++j) {
    model.coefficients[static_cast<std::size_t>(active[static_cast<std::size_t>(j)])] = beta(1 + j);
  }
  return model;
}

Eigen::VectorXd predict_rows(const FittedModel& model, const BlockedDataset& ds,
                             std::span<const int> rows) {
  check_variables(ds, model.variables);
  if (model.coefficients.size() != model.variables.size()) {
    throw ValidationError("model coefficients and variables are misaligned");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(rows[i]);
    double eta = model.intercept;
    for (std::size_t j = 0; j < model.variables.size(); ++j) {
      eta += model.coefficients[j] *
             ds.features()(row, static_cast<Eigen::Index>(model.variables[j]));
    }
    const double p = sigmoid(eta);
    out(static_cast<Eigen::Index>(i)) = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  }
  return out;
}

ProbabilityVector predict(const FittedModel& model, const BlockedDataset& ds) {
  std::vector<int> all(static_cast<std::size_t>(ds.n_cases()));
  std::iota(all.begin(), all.end(), 0);
  const Eigen::VectorXd p = predict_rows(model, ds, all);
  ProbabilityVector pv;
  pv.values.assign(p.data(), p.data() + p.size());
  pv.provenance = "model:" + variables_to_string(model.variables);
  return pv;
}

ProbabilityVector cv_probabilities(const BlockedDataset& ds,
                                   const std::vector<int>& variables,
                                   const FoldAssignment& folds, double ridge) {
  check_variables(ds, variables);
  if (folds.v < 1) throw ValidationError("fold assignment is empty");
  const auto& y = ds.labels();

  // Resolve each block's fold up front; every dataset block must be covered.
  std::vector<int> block_fold(ds.blocks().size());
  for (std::size_t b = 0; b < ds.blocks().size(); ++b) {
    const auto it = folds.block_to_fold.find(ds.blocks()[b]);
    if (it == folds.block_to_fold.end()) {
      throw ValidationError("block '" + ds.blocks()[b] + "' has no fold assignment");
    }
    block_fold[b] = it->second;
  }

  std::vector<double> values(static_cast<std::size_t>(ds.n_cases()), -1.0);
  for (int f = 0; f < folds.v; ++f) {
    std::vector<int> train_rows, test_rows;
    for (std::size_t b = 0; b < ds.blocks().size(); ++b) {
      auto& target = block_fold[b] == f ? test_rows : train_rows;
      const auto& rows = ds.block_rows()[b];
      target.insert(target.end(), rows.begin(), rows.end());
    }
    if (test_rows.empty()) continue;  // this fold holds none of ds's blocks
    if (train_rows.empty()) {
      throw ValidationError("fold " + std::to_string(f) + " leaves no training blocks");
    }
    const bool has_positive = std::any_of(train_rows.begin(), train_rows.end(), [&](int r) {
      return y[static_cast<std::size_t>(r)] == 1;
    });
    if (!has_positive) {
      throw ValidationError("training split for fold " + std::to_string(f) +
                            " contains no positive cases");
    }
    const FittedModel model = fit_logistic_rows(ds, train_rows, variables, ridge);
    const Eigen::VectorXd p = predict_rows(model, ds, test_rows);
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      values[static_cast<std::size_t>(test_rows[i])] = p(static_cast<Eigen::Index>(i));
    }
  }

  ProbabilityVector pv;
  pv.values = std::move(values);
  pv.provenance = "cv:" + variables_to_string(variables);
  return pv;
}

}  // namespace phalanx
