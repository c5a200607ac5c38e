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
#include "phalanx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "phalanx/error.hpp"
#include "phalanx/parallel.hpp"
#include "phalanx/rng.hpp"
#include "phalanx/util.hpp"

namespace phalanx {

std::string to_string(MetricId id) {
  switch (id) {
    case MetricId::APR: return "APR";
    case MetricId::RKL: return "RKL";
    case MetricId::TOP1: return "TOP1";
  }
  return "?";
}

MetricId metric_id_from_string(const std::string& name) {
  if (name == "APR" || name == "apr") return MetricId::APR;
  if (name == "RKL" || name == "rkl") return MetricId::RKL;
  if (name == "TOP1" || name == "top1") return MetricId::TOP1;
  throw ParseError("unknown metric '" + name + "'");
}

MetricSpec MetricSpec::from_id(MetricId id) {
  switch (id) {
    case MetricId::APR: return apr();
    case MetricId::RKL: return rkl();
    case MetricId::TOP1: return top1();
  }
  return apr();
}

namespace {

void check_aligned(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw ValidationError("labels (" + std::to_string(labels.size()) + ") and scores (" +
                          std::to_string(scores.size()) + ") differ in length");
  }
  if (labels.empty()) throw ValidationError("empty block");
}

int count_positives(std::span<const int> labels) {
  return std::accumulate(labels.begin(), labels.end(), 0);
}

void require_positive(std::span<const int> labels, const char* metric) {
  if (count_positives(labels) == 0) {
    throw ValidationError(std::string(metric) + " is undefined on a block with no positives");
  }
}

}  // namespace

std::vector<int> pessimistic_order(std::span<const int> labels,
                                   std::span<const double> scores) {
  check_aligned(labels, scores);
  std::vector<int> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto ia = static_cast<std::size_t>(a);
    const auto ib = static_cast<std::size_t>(b);
    if (scores[ia] != scores[ib]) return scores[ia] > scores[ib];
    if (labels[ia] != labels[ib]) return labels[ia] < labels[ib];
    return a < b;
  });
  return order;
}

double apr_block(std::span<const int> labels, std::span<const double> scores) {
  require_positive(labels, "APR");
  const auto order = pessimistic_order(labels, scores);
  int hits = 0;
  double sum = 0.0;
  for (std::size_t t = 0; t < order.size(); ++t) {
    if (labels[static_cast<std::size_t>(order[t])] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(t + 1);
    }
  }
  return sum / hits;
}

int rkl_block(std::span<const int> labels, std::span<const double> scores) {
  require_positive(labels, "RKL");
  const auto order = pessimistic_order(labels, scores);
  int last = 0;
  for (std::size_t t = 0; t < order.size(); ++t) {
    if (labels[static_cast<std::size_t>(order[t])] == 1) last = static_cast<int>(t + 1);
  }
  return last;
}

int top1_block(std::span<const int> labels, std::span<const double> scores) {
  require_positive(labels, "TOP1");
  const auto order = pessimistic_order(labels, scores);
  return labels[static_cast<std::size_t>(order.front())] == 1 ? 1 : 0;
}

double metric_block(MetricId id, std::span<const int> labels,
                    std::span<const double> scores) {
  switch (id) {
    case MetricId::APR: return apr_block(labels, scores);
    case MetricId::RKL: return static_cast<double>(rkl_block(labels, scores));
    case MetricId::TOP1: return static_cast<double>(top1_block(labels, scores));
  }
  throw ValidationError("unknown metric id");
}

HitCurve hit_curve(std::span<const int> labels, std::span<const double> scores) {
  check_aligned(labels, scores);
  const auto order = pessimistic_order(labels, scores);
  HitCurve curve;
  curve.n = static_cast<int>(labels.size());
  curve.hits.resize(labels.size());
  int hits = 0;
  for (std::size_t t = 0; t < order.size(); ++t) {
    hits += labels[static_cast<std::size_t>(order[t])];
    curve.hits[t] = hits;
  }
  curve.h = hits;
  return curve;
}

double block_average(const BlockedDataset& ds, std::span<const double> scores,
                     const MetricSpec& metric) {
  if (static_cast<int>(scores.size()) != ds.n_cases()) {
    throw ValidationError("score vector does not match dataset size");
  }
  const auto& y = ds.labels();
  double sum = 0.0;
  for (std::size_t b = 0; b < ds.blocks().size(); ++b) {
    const auto& rows = ds.block_rows()[b];
    std::vector<int> bl;
    std::vector<double> bs;
    bl.reserve(rows.size());
    bs.reserve(rows.size());
    for (int r : rows) {
      bl.push_back(y[static_cast<std::size_t>(r)]);
      bs.push_back(scores[static_cast<std::size_t>(r)]);
    }
    try {
      sum += metric_block(metric.id, bl, bs);
    } catch (const ValidationError& e) {
      throw ValidationError("block '" + ds.blocks()[b] + "': " + e.what());
    }
  }
  return sum / static_cast<double>(ds.blocks().size());
}

double type1_quantile(std::span<const double> sorted_ascending, double p) {
  if (sorted_ascending.empty()) throw ValidationError("quantile of an empty sample");
  if (p < 0.0 || p > 1.0) throw ValidationError("quantile level must be in [0, 1]");
  const auto m = static_cast<double>(sorted_ascending.size());
  // ceil(p*m) with a nudge so exact products are not pushed up by rounding
  auto k = static_cast<long long>(std::ceil(p * m - 1e-9));
  k = std::max<long long>(1, std::min<long long>(k, sorted_ascending.size()));
  return sorted_ascending[static_cast<std::size_t>(k - 1)];
}

ReferenceDistribution::ReferenceDistribution(std::vector<double> samples,
                                             MetricSpec metric, std::uint64_t seed)
    : samples_(std::move(samples)), metric_(metric), seed_(seed) {
  if (samples_.empty()) throw ValidationError("reference distribution needs samples");
  sorted_ = samples_;
  std::sort(sorted_.begin(), sorted_.end());
}

double ReferenceDistribution::quantile(double p) const {
  return type1_quantile(sorted_, p);
}

ReferenceDistribution permutation_reference(const BlockedDataset& ds,
                                            const MetricSpec& metric, int n_perm,
                                            std::uint64_t seed, int jobs) {
  if (n_perm < 1) throw ValidationError("permutation count must be at least 1");
  const auto& y = ds.labels();
  const auto n_blocks = ds.blocks().size();

  // Fixed within-block case order: the ranking every permuted label vector
  // is scored against is the order the cases appear in the data.
  std::vector<std::vector<double>> base_scores(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const auto nb = ds.block_rows()[b].size();
    base_scores[b].resize(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      base_scores[b][k] = static_cast<double>(nb - k);
    }
  }

  constexpr int kMaxRedraws = 1000;
  std::vector<double> samples(static_cast<std::size_t>(n_perm));
  parallel_for(n_perm, jobs, [&](int r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    std::vector<int> permuted = y;
    bool valid = false;
    for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
      rng.shuffle(permuted);
      valid = true;
      for (std::size_t b = 0; b < n_blocks && valid; ++b) {
        int h = 0;
        for (int row : ds.block_rows()[b]) h += permuted[static_cast<std::size_t>(row)];
        valid = h > 0;
      }
      if (valid) break;
    }
    if (!valid) {
      throw NumericalError("permutation reference: exceeded " +
                           std::to_string(kMaxRedraws) +
                           " redraws without covering every block; too few positives (" +
                           std::to_string(count_positives(y)) + ") for " +
                           std::to_string(n_blocks) + " blocks");
    }
    double sum = 0.0;
    std::vector<int> bl;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const auto& rows = ds.block_rows()[b];
      bl.clear();
      bl.reserve(rows.size());
      for (int row : rows) bl.push_back(permuted[static_cast<std::size_t>(row)]);
      sum += metric_block(metric.id, bl, base_scores[b]);
    }
    samples[static_cast<std::size_t>(r)] = sum / static_cast<double>(n_blocks);
  });
  return ReferenceDistribution(std::move(samples), metric, seed);
}

void write_hit_curve(const std::string& path, const HitCurve& curve) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write hit curve file '" + path + "'");
  for (std::size_t t = 0; t < curve.hits.size(); ++t) {
    out << (t + 1) << '\t' << curve.hits[t] << '\n';
  }
  if (!out) throw ValidationError("failed writing hit curve file '" + path + "'");
}

void write_reference_samples(const std::string& path, const ReferenceDistribution& ref) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write reference samples file '" + path + "'");
  const auto& samples = ref.samples();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << (i + 1) << '\t' << format_g17(samples[i]) << '\n';
  }
  if (!out) throw ValidationError("failed writing reference samples file '" + path + "'");
}

}  // namespace phalanx
