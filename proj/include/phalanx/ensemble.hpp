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
#ifndef PHALANX_ENSEMBLE_HPP_
#define PHALANX_ENSEMBLE_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "phalanx/apf.hpp"
#include "phalanx/dataset.hpp"
#include "phalanx/logistic.hpp"

namespace phalanx {

struct EnsembleProvenance {
  std::uint64_t seed = 0;
  int v = 10;
  int n_perm = 2000;
  double ridge = kDefaultRidge;
  int n_features = 0;
};

// Final phalanxes with one full-data logistic model each; predicts by
// averaging the per-phalanx probability vectors.
struct EnsembleModel {
  MetricSpec metric;
  std::vector<Phalanx> phalanxes;
  std::vector<FittedModel> models;  // aligned with phalanxes
  EnsembleProvenance provenance;
};

EnsembleModel build_em(const BlockedDataset& ds, const ApfResult& apf, double ridge);

// Componentwise mean of the per-phalanx predictions.
ProbabilityVector predict_em(const EnsembleModel& em, const BlockedDataset& ds);

// n-ary mean of aligned probability vectors.
ProbabilityVector mean_probability(std::span<const ProbabilityVector> parts,
                                   const std::string& provenance);

// Ensemble of models and metrics: the mean of two metric-optimized EM
// vectors. Commutative, and idempotent on equal inputs.
ProbabilityVector build_emm(const ProbabilityVector& a, const ProbabilityVector& b);

// Win/tie/loss table for two score vectors over the positives, binned by
// quartiles of the averaged normalized within-block rank. Ranks are 1-based
// descending with ties charged at the end of the tied group; normalized
// rank = rank / block size.
struct RankDiagnostics {
  struct Record {
    std::string block;
    std::string case_id;
    double nrank_a = 0.0;
    double nrank_b = 0.0;
    double nrank_mean = 0.0;
  };
  struct Bin {
    double lo = 0.0;
    double hi = 1.0;
    int positives = 0;
    int a_wins = 0;
    int ties = 0;
    int b_wins = 0;
  };

  std::vector<Record> records;   // one per positive case, dataset order
  std::array<double, 3> edges{}; // quartiles of nrank_mean
  std::array<Bin, 4> bins{};
};

RankDiagnostics rank_diagnostics(const BlockedDataset& ds, const ProbabilityVector& a,
                                 const ProbabilityVector& b);

void write_diagnostics(const std::string& path, const RankDiagnostics& diag);

}  // namespace phalanx

#endif  // PHALANX_ENSEMBLE_HPP_
