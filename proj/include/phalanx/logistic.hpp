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
#ifndef PHALANX_LOGISTIC_HPP_
#define PHALANX_LOGISTIC_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "phalanx/dataset.hpp"
#include "phalanx/metrics.hpp"

namespace phalanx {

inline constexpr double kProbClamp = 1e-12;
inline constexpr double kIrlsTol = 1e-8;
inline constexpr int kIrlsMaxIter = 100;
inline constexpr double kIrlsWeightFloor = 1e-10;
inline constexpr double kDefaultRidge = 1e-6;

// Maximum-likelihood logistic regression on a variable subset.
struct FittedModel {
  double intercept = 0.0;
  std::vector<double> coefficients;  // aligned with `variables`
  std::vector<int> variables;        // ordered feature indices
  bool converged = false;
  int iterations = 0;
  // Constant design columns are excluded from the solve and their
  // coefficients pinned to zero; the flags record which.
  std::vector<std::uint8_t> pinned;

  bool any_pinned() const;
};

// Per-case scores aligned to a dataset; the currency passed between the
// learner, metrics, and ensembles. Values stay strictly inside (0, 1).
struct ProbabilityVector {
  std::vector<double> values;
  std::string provenance;
};

// IRLS fit of the Bernoulli log-likelihood plus a ridge penalty
// -(ridge/2)*||slopes||^2. Stops when the largest coefficient change drops
// below 1e-8 or after 100 iterations; `converged` reports which. The
// weighted least-squares step uses a rank-revealing (column-pivoted QR)
// solve, so redundant columns come back as exact zeros.
FittedModel fit_logistic(const BlockedDataset& ds, const std::vector<int>& variables,
                         double ridge = kDefaultRidge);
FittedModel fit_logistic_rows(const BlockedDataset& ds, std::span<const int> rows,
                              const std::vector<int>& variables, double ridge);

// Inverse-logit of the linear predictor, clamped to [1e-12, 1 - 1e-12].
ProbabilityVector predict(const FittedModel& model, const BlockedDataset& ds);
Eigen::VectorXd predict_rows(const FittedModel& model, const BlockedDataset& ds,
                             std::span<const int> rows);

// Out-of-fold probabilities: each fold's blocks are scored by a model fit
// on the other v-1 folds, covering every case exactly once.
ProbabilityVector cv_probabilities(const BlockedDataset& ds,
                                   const std::vector<int>& variables,
                                   const FoldAssignment& folds, double ridge);

inline double block_average(const BlockedDataset& ds, const ProbabilityVector& pv,
                            const MetricSpec& metric) {
  return block_average(ds, std::span<const double>(pv.values), metric);
}

}  // namespace phalanx

#endif  // PHALANX_LOGISTIC_HPP_
