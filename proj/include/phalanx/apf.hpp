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
#ifndef PHALANX_APF_HPP_
#define PHALANX_APF_HPP_

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "phalanx/dataset.hpp"
#include "phalanx/logistic.hpp"
#include "phalanx/metrics.hpp"

namespace phalanx {

// A subset of feature variables treated as one model's inputs, plus the
// block-averaged metric of its cross-validated probability vector.
struct Phalanx {
  std::vector<int> variables;  // sorted ascending
  double cv_score = 0.0;
};

// One filter / merge / drop decision, with the criterion value that caused
// it. The full trace makes a greedy run replayable.
struct TraceEvent {
  int phase = 0;
  int iteration = 0;
  std::string subject;
  double criterion = 0.0;
  std::string action;  // kept | dropped | merged | stopped | pair_failed | degenerate_keep
  std::string detail;

  std::string to_line() const;  // tab-separated, deterministic formatting
};

void write_trace(const std::string& path, std::span<const TraceEvent> trace);

struct ApfConfig {
  int v = 10;
  int n_perm = 2000;
  std::uint64_t seed = 0;
  double ridge = kDefaultRidge;
  int jobs = 1;
};

// Memoized evaluator for variable groups: cross-validated probability vector
// plus its block-averaged metric, keyed by the sorted variable set. Shared
// across the three phases; safe for concurrent insert/read, and a pure
// function table, so caching cannot change results. A fit that goes
// numerically bad is recorded as a failed entry rather than thrown, letting
// the merge and drop phases treat the affected pair as ineligible.
class GroupEvaluator {
 public:
  struct Entry {
    std::vector<double> cv_probs;
    double score = 0.0;
    bool ok = false;
    std::string error;
  };

  GroupEvaluator(const BlockedDataset& ds, const FoldAssignment& folds,
                 MetricSpec metric, double ridge, int jobs);

  // Memoized lookup; computes on miss. The reference stays valid for the
  // evaluator's lifetime.
  const Entry& eval(const std::vector<int>& variables);

  // Computes any missing sets in parallel (`jobs` threads).
  void prefetch(const std::vector<std::vector<int>>& sets);

  // Metric of the componentwise mean of two groups' CV vectors.
  double ensemble_score(const Entry& a, const Entry& b) const;

  const BlockedDataset& dataset() const { return ds_; }
  const FoldAssignment& folds() const { return folds_; }
  const MetricSpec& metric() const { return metric_; }
  double ridge() const { return ridge_; }
  int jobs() const { return jobs_; }

 private:
  Entry compute(const std::vector<int>& variables) const;
  static std::string key_of(const std::vector<int>& variables);

  const BlockedDataset& ds_;
  const FoldAssignment& folds_;
  MetricSpec metric_;
  double ridge_;
  int jobs_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::unique_ptr<Entry>> cache_;
};

// Pairwise quantities for groups i and j: individual scores, the joint
// score (one model on the union of variables), and the ensemble score
// (metric of the mean of the two CV vectors).
struct PairScores {
  double a_i = 0.0;
  double a_j = 0.0;
  double a_ij = 0.0;
  double a_ij_bar = 0.0;
};

struct FilterVariablesResult {
  std::vector<int> survivors;  // sorted ascending
  std::vector<TraceEvent> trace;
};

// Phase 1. A variable is dropped only if it is weak by itself, weak jointly
// with every other variable, and weak in every two-variable ensemble, as
// judged against the permutation reference cut. Decisions are simultaneous
// over the original variable set.
FilterVariablesResult filter_variables(const BlockedDataset& ds,
                                       const FoldAssignment& folds,
                                       const MetricSpec& metric,
                                       const ReferenceDistribution& reference,
                                       double ridge, int jobs = 1,
                                       GroupEvaluator* cache = nullptr);

struct MergePhaseResult {
  std::vector<Phalanx> candidates;
  std::vector<TraceEvent> trace;
};

// Phase 2. Greedy agglomeration of survivor singletons: repeatedly take the
// extremal pair of the merge criterion and merge while the joint model beats
// both individuals and their ensemble.
MergePhaseResult merge_phase(const BlockedDataset& ds, const FoldAssignment& folds,
                             const std::vector<int>& survivors,
                             const MetricSpec& metric, double ridge, int jobs = 1,
                             GroupEvaluator* cache = nullptr);

struct FilterPhalanxesResult {
  std::vector<Phalanx> finals;
  std::vector<TraceEvent> trace;
};

// Phase 3. Repeatedly drop the weaker member of the pair whose ensemble
// fails to improve on its better member; the best-scoring candidate always
// survives.
FilterPhalanxesResult filter_phalanxes(const BlockedDataset& ds,
                                       const FoldAssignment& folds,
                                       const std::vector<Phalanx>& candidates,
                                       const MetricSpec& metric, double ridge,
                                       int jobs = 1, GroupEvaluator* cache = nullptr);

struct ApfResult {
  MetricSpec metric;
  std::vector<int> survivors_phase1;
  std::vector<Phalanx> candidates_phase2;
  std::vector<Phalanx> final_phase3;
  std::vector<TraceEvent> trace;
  ReferenceDistribution reference;
  // Set when phase 1 dropped everything and the single best variable was
  // retained to keep downstream phases defined.
  bool degenerate_survivor = false;
  ApfConfig config;
};

// Full three-phase run: folds and reference from the seed, then
// filter -> merge -> filter, with the complete decision trace.
ApfResult run_apf(const BlockedDataset& ds, const MetricSpec& metric,
                  const ApfConfig& config);

}  // namespace phalanx

#endif  // PHALANX_APF_HPP_
