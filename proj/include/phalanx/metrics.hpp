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
#ifndef PHALANX_METRICS_HPP_
#define PHALANX_METRICS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "phalanx/dataset.hpp"

namespace phalanx {

enum class MetricId { APR, RKL, TOP1 };
enum class Direction { Maximize, Minimize };

std::string to_string(MetricId id);
MetricId metric_id_from_string(const std::string& name);

// Which ranking metric drives a run, which way it improves, and the
// reference-distribution quantile level used as the variable-filter cut.
struct MetricSpec {
  MetricId id = MetricId::APR;
  Direction direction = Direction::Maximize;
  double alpha = 0.95;

  static MetricSpec apr() { return {MetricId::APR, Direction::Maximize, 0.95}; }
  static MetricSpec rkl() { return {MetricId::RKL, Direction::Minimize, 0.05}; }
  static MetricSpec top1() { return {MetricId::TOP1, Direction::Maximize, 0.95}; }
  static MetricSpec from_id(MetricId id);

  bool maximize() const { return direction == Direction::Maximize; }
  // True when a is strictly better than b under this direction.
  bool better(double a, double b) const { return maximize() ? a > b : a < b; }
};

// Case order used by every metric: descending score, and within a tied score
// group negatives come first. Ties never help: the conventions for rank-last
// and top-1 fall out of this single order, and average precision adopts it
// for consistency.
std::vector<int> pessimistic_order(std::span<const int> labels,
                                   std::span<const double> scores);

// Mean over positives of (positives seen at its rank) / rank.
double apr_block(std::span<const int> labels, std::span<const double> scores);

// 1-based rank of the last positive; a tie is charged at the end of the
// tied group.
int rkl_block(std::span<const int> labels, std::span<const double> scores);

// 1 iff every case tied at the maximum score is positive.
int top1_block(std::span<const int> labels, std::span<const double> scores);

double metric_block(MetricId id, std::span<const int> labels,
                    std::span<const double> scores);

struct HitCurve {
  std::vector<int> hits;  // hits[t-1] = positives among the top t cases
  int n = 0;
  int h = 0;
};

HitCurve hit_curve(std::span<const int> labels, std::span<const double> scores);

// Per-block metric averaged (unweighted) over blocks.
double block_average(const BlockedDataset& ds, std::span<const double> scores,
                     const MetricSpec& metric);

// Type-1 (inverse CDF) empirical quantile of an ascending-sorted sample.
double type1_quantile(std::span<const double> sorted_ascending, double p);

// Null distribution of the block-averaged metric under global label
// permutation with the within-block case order held fixed.
class ReferenceDistribution {
 public:
  ReferenceDistribution(std::vector<double> samples, MetricSpec metric,
                        std::uint64_t seed);

  const std::vector<double>& samples() const { return samples_; }
  int n_perm() const { return static_cast<int>(samples_.size()); }
  const MetricSpec& metric() const { return metric_; }
  std::uint64_t seed() const { return seed_; }

  double quantile(double p) const;

 private:
  std::vector<double> samples_;
  std::vector<double> sorted_;
  MetricSpec metric_;
  std::uint64_t seed_;
};

// Draws n_perm label permutations (replicate r uses the substream
// mix_seed(seed, r), so replicates may be computed concurrently), rejecting
// and redrawing any permutation that leaves a block positive-free, up to
// 1000 redraws per replicate.
ReferenceDistribution permutation_reference(const BlockedDataset& ds,
                                            const MetricSpec& metric, int n_perm,
                                            std::uint64_t seed, int jobs = 1);

void write_hit_curve(const std::string& path, const HitCurve& curve);
void write_reference_samples(const std::string& path,
                             const ReferenceDistribution& ref);

}  // namespace phalanx

#endif  // PHALANX_METRICS_HPP_
