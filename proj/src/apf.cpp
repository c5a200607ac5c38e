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
#include "phalanx/apf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_set>

#include "phalanx/error.hpp"
#include "phalanx/parallel.hpp"
#include "phalanx/rng.hpp"
#include "phalanx/util.hpp"

namespace phalanx {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Substream tag separating the permutation-reference draws from the fold
// shuffle, which consumes the user seed directly.
constexpr std::uint64_t kReferenceStream = 0x7265666469737472ULL;

std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> u;
  u.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  return u;
}

// Deterministic tie-break order for pairs of variable groups: smallest
// (min, max) over the union, then the union itself, then the first group.
struct PairKey {
  std::vector<int> unioned;
  std::vector<int> first;

  PairKey(const std::vector<int>& a, const std::vector<int>& b)
      : unioned(sorted_union(a, b)), first(a) {}

  bool operator<(const PairKey& other) const {
    const int lo = unioned.front(), hi = unioned.back();
    const int olo = other.unioned.front(), ohi = other.unioned.back();
    if (lo != olo) return lo < olo;
    if (hi != ohi) return hi < ohi;
    if (unioned != other.unioned) return unioned < other.unioned;
    return first < other.first;
  }
};

std::string pair_subject(const std::vector<int>& a, const std::vector<int>& b) {
  return variables_to_string(a) + "|" + variables_to_string(b);
}

std::string pair_score_detail(const PairScores& s) {
  return "a_i=" + format_g17(s.a_i) + " a_j=" + format_g17(s.a_j) +
         " a_ij=" + format_g17(s.a_ij) + " a_ij_bar=" + format_g17(s.a_ij_bar);
}

}  // namespace

std::string TraceEvent::to_line() const {
  return std::to_string(phase) + '\t' + std::to_string(iteration) + '\t' + subject +
         '\t' + format_g17(criterion) + '\t' + action + '\t' + detail;
}

void write_trace(const std::string& path, std::span<const TraceEvent> trace) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write trace file '" + path + "'");
  out << "# phase\titeration\tsubject\tcriterion\taction\tdetail\n";
  for (const auto& event : trace) out << event.to_line() << '\n';
  if (!out) throw ValidationError("failed writing trace file '" + path + "'");
}

GroupEvaluator::GroupEvaluator(const BlockedDataset& ds, const FoldAssignment& folds,
                               MetricSpec metric, double ridge, int jobs)
    : ds_(ds), folds_(folds), metric_(metric), ridge_(ridge), jobs_(std::max(1, jobs)) {}

std::string GroupEvaluator::key_of(const std::vector<int>& variables) {
  return variables_to_string(variables);
}

GroupEvaluator::Entry GroupEvaluator::compute(const std::vector<int>& variables) const {
  Entry entry;
  try {
    ProbabilityVector pv = cv_probabilities(ds_, variables, folds_, ridge_);
    entry.score = block_average(ds_, pv, metric_);
    entry.cv_probs = std::move(pv.values);
    entry.ok = std::isfinite(entry.score);
    if (!entry.ok) entry.error = "non-finite metric value";
  } catch (const NumericalError& e) {
    entry.ok = false;
    entry.error = e.what();
  }
  return entry;
}

const GroupEvaluator::Entry& GroupEvaluator::eval(const std::vector<int>& variables) {
  const std::string key = key_of(variables);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
  }
  auto fresh = std::make_unique<Entry>(compute(variables));
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = cache_.emplace(key, std::move(fresh));
  return *it->second;
}

void GroupEvaluator::prefetch(const std::vector<std::vector<int>>& sets) {
  std::vector<const std::vector<int>*> missing;
  {
    std::lock_guard<std::mutex> lock(mu_);
    std::unordered_set<std::string> seen;
    for (const auto& vars : sets) {
      std::string key = key_of(vars);
      if (cache_.count(key) > 0) continue;
      if (!seen.insert(std::move(key)).second) continue;
      missing.push_back(&vars);
    }
  }
  if (missing.empty()) return;
  std::vector<Entry> results(missing.size());
  parallel_for(static_cast<int>(missing.size()), jobs_, [&](int i) {
    results[static_cast<std::size_t>(i)] = compute(*missing[static_cast<std::size_t>(i)]);
  });
  std::lock_guard<std::mutex> lock(mu_);
  for (std::size_t i = 0; i < missing.size(); ++i) {
    cache_.emplace(key_of(*missing[i]),
                   std::make_unique<Entry>(std::move(results[i])));
  }
}

double GroupEvaluator::ensemble_score(const Entry& a, const Entry& b) const {
  std::vector<double> mean(a.cv_probs.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    mean[i] = (a.cv_probs[i] + b.cv_probs[i]) / 2.0;
  }
  return block_average(ds_, mean, metric_);
}

FilterVariablesResult filter_variables(const BlockedDataset& ds,
                                       const FoldAssignment& folds,
                                       const MetricSpec& metric,
                                       const ReferenceDistribution& reference,
                                       double ridge, int jobs, GroupEvaluator* cache) {
  GroupEvaluator local(ds, folds, metric, ridge, jobs);
  GroupEvaluator& ev = cache ? *cache : local;
  const int d = ds.d_vars();
  const bool maximize = metric.maximize();
  const double cut = reference.quantile(metric.alpha);
  const double median = reference.quantile(0.5);

  std::vector<std::vector<int>> sets;
  sets.reserve(static_cast<std::size_t>(d) + static_cast<std::size_t>(d) * (d - 1) / 2);
  for (int i = 0; i < d; ++i) sets.push_back({i});
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) sets.push_back({i, j});
  }
  ev.prefetch(sets);

  std::vector<const GroupEvaluator::Entry*> singles(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    singles[static_cast<std::size_t>(i)] = &ev.eval({i});
    if (!singles[static_cast<std::size_t>(i)]->ok) {
      throw NumericalError("variable x" + std::to_string(i) + ": " +
                           singles[static_cast<std::size_t>(i)]->error);
    }
  }

  FilterVariablesResult result;
  // Pair tables; a failed joint fit makes the pair unusable for both members.
  std::vector<std::vector<double>> joint(static_cast<std::size_t>(d),
                                         std::vector<double>(static_cast<std::size_t>(d), kNaN));
  std::vector<std::vector<double>> ens(static_cast<std::size_t>(d),
                                       std::vector<double>(static_cast<std::size_t>(d), kNaN));
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const auto& pair_entry = ev.eval({i, j});
      if (!pair_entry.ok) {
        result.trace.push_back({1, 0, pair_subject({i}, {j}), kNaN, "pair_failed",
                                pair_entry.error});
        continue;
      }
      const double bar = ev.ensemble_score(*singles[static_cast<std::size_t>(i)],
                                           *singles[static_cast<std::size_t>(j)]);
      joint[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = pair_entry.score;
      joint[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = pair_entry.score;
      ens[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = bar;
      ens[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = bar;
    }
  }

  // Simultaneous decisions against the original variable set.
  for (int i = 0; i < d; ++i) {
    const double a_i = singles[static_cast<std::size_t>(i)]->score;
    double best = a_i;
    int best_j = -1;
    for (int j = 0; j < d; ++j) {
      if (j == i) continue;
      const double a_ij = joint[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (!std::isfinite(a_ij)) continue;  // failed pair, skip this witness
      const double a_j = singles[static_cast<std::size_t>(j)]->score;
      const double a_bar = ens[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      double value;
      if (maximize) {
        value = std::max(a_i, std::max(median + a_ij - a_j, median + a_bar - a_j));
        if (value > best) {
          best = value;
          best_j = j;
        }
      } else {
        value = std::min(a_i, std::min(median + a_ij - a_j, median + a_bar - a_j));
        if (value < best) {
          best = value;
          best_j = j;
        }
      }
    }
    const bool kept = maximize ? best >= cut : best <= cut;
    if (kept) result.survivors.push_back(i);
    std::string detail = "cut=" + format_g17(cut) + " median=" + format_g17(median);
    detail += best_j >= 0 ? " best_j=x" + std::to_string(best_j) : " best_j=self";
    result.trace.push_back({1, 0, "x" + std::to_string(i), best,
                            kept ? "kept" : "dropped", std::move(detail)});
  }
  return result;
}

MergePhaseResult merge_phase(const BlockedDataset& ds, const FoldAssignment& folds,
                             const std::vector<int>& survivors, const MetricSpec& metric,
                             double ridge, int jobs, GroupEvaluator* cache) {
  if (survivors.empty()) throw ValidationError("merge phase requires at least one survivor");
  GroupEvaluator local(ds, folds, metric, ridge, jobs);
  GroupEvaluator& ev = cache ? *cache : local;
  const bool maximize = metric.maximize();

  std::vector<std::vector<int>> groups;
  groups.reserve(survivors.size());
  std::vector<int> sorted_survivors = survivors;
  std::sort(sorted_survivors.begin(), sorted_survivors.end());
  for (int v : sorted_survivors) groups.push_back({v});

  MergePhaseResult result;
  int iteration = 0;
  while (groups.size() > 1) {
    ++iteration;
    std::vector<std::vector<int>> sets = groups;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        sets.push_back(sorted_union(groups[i], groups[j]));
      }
    }
    ev.prefetch(sets);

    bool found = false;
    double best_m = kNaN;
    std::size_t best_i = 0, best_j = 0;
    PairScores best_scores;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        const auto& gi = ev.eval(groups[i]);
        const auto& gj = ev.eval(groups[j]);
        const auto unioned = sorted_union(groups[i], groups[j]);
        const auto& gij = ev.eval(unioned);
        if (!gi.ok || !gj.ok || !gij.ok) {
          result.trace.push_back({2, iteration, pair_subject(groups[i], groups[j]), kNaN,
                                  "pair_failed",
                                  !gij.ok ? gij.error : (!gi.ok ? gi.error : gj.error)});
          continue;
        }
        if (!(gij.score > 0.0) || !std::isfinite(gij.score)) {
          result.trace.push_back({2, iteration, pair_subject(groups[i], groups[j]), kNaN,
                                  "pair_failed", "joint score not a positive finite value"});
          continue;
        }
        PairScores scores{gi.score, gj.score, gij.score, ev.ensemble_score(gi, gj)};
        const double m =
            maximize
                ? std::max(scores.a_ij_bar, std::max(scores.a_i, scores.a_j)) / scores.a_ij
                : std::min(scores.a_ij_bar, std::min(scores.a_i, scores.a_j)) / scores.a_ij;
        bool take = !found;
        if (found) {
          if (m != best_m) {
            take = maximize ? m < best_m : m > best_m;
          } else {
            take = PairKey(groups[i], groups[j]) < PairKey(groups[best_i], groups[best_j]);
          }
        }
        if (take) {
          found = true;
          best_m = m;
          best_i = i;
          best_j = j;
          best_scores = scores;
        }
      }
    }

    if (!found) {
      result.trace.push_back({2, iteration, "-", kNaN, "stopped", "no eligible pairs"});
      break;
    }
    const bool merge = maximize ? best_m < 1.0 : best_m > 1.0;
    const std::string subject = pair_subject(groups[best_i], groups[best_j]);
    if (!merge) {
      result.trace.push_back({2, iteration, subject, best_m, "stopped",
                              pair_score_detail(best_scores)});
      break;
    }
    result.trace.push_back({2, iteration, subject, best_m, "merged",
                            pair_score_detail(best_scores)});
    groups[best_i] = sorted_union(groups[best_i], groups[best_j]);
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(best_j));
  }

  for (const auto& g : groups) {
    const auto& entry = ev.eval(g);
    if (!entry.ok) {
      throw NumericalError("candidate phalanx " + variables_to_string(g) + ": " + entry.error);
    }
    result.candidates.push_back({g, entry.score});
  }
  return result;
}

FilterPhalanxesResult filter_phalanxes(const BlockedDataset& ds,
                                       const FoldAssignment& folds,
                                       const std::vector<Phalanx>& candidates,
                                       const MetricSpec& metric, double ridge, int jobs,
                                       GroupEvaluator* cache) {
  if (candidates.empty()) throw ValidationError("phalanx filter requires candidates");
  GroupEvaluator local(ds, folds, metric, ridge, jobs);
  GroupEvaluator& ev = cache ? *cache : local;
  const bool maximize = metric.maximize();

  FilterPhalanxesResult result;
  std::vector<Phalanx> items = candidates;
  {
    std::vector<std::vector<int>> sets;
    sets.reserve(items.size());
    for (const auto& p : items) sets.push_back(p.variables);
    ev.prefetch(sets);
  }

  int iteration = 0;
  while (items.size() > 1) {
    ++iteration;
    bool found = false;
    double best_f = kNaN;
    std::size_t best_i = 0, best_j = 0;
    PairScores best_scores;
    for (std::size_t i = 0; i < items.size(); ++i) {
      for (std::size_t j = i + 1; j < items.size(); ++j) {
        const auto& gi = ev.eval(items[i].variables);
        const auto& gj = ev.eval(items[j].variables);
        if (!gi.ok || !gj.ok) {
          result.trace.push_back({3, iteration,
                                  pair_subject(items[i].variables, items[j].variables), kNaN,
                                  "pair_failed", !gi.ok ? gi.error : gj.error});
          continue;
        }
        const double denom =
            maximize ? std::max(gi.score, gj.score) : std::min(gi.score, gj.score);
        if (!(denom > 0.0) || !std::isfinite(denom)) {
          result.trace.push_back({3, iteration,
                                  pair_subject(items[i].variables, items[j].variables), kNaN,
                                  "pair_failed", "denominator not a positive finite value"});
          continue;
        }
        PairScores scores{gi.score, gj.score, kNaN, ev.ensemble_score(gi, gj)};
        const double f = scores.a_ij_bar / denom;
        bool take = !found;
        if (found) {
          if (f != best_f) {
            take = maximize ? f < best_f : f > best_f;
          } else {
            take = PairKey(items[i].variables, items[j].variables) <
                   PairKey(items[best_i].variables, items[best_j].variables);
          }
        }
        if (take) {
          found = true;
          best_f = f;
          best_i = i;
          best_j = j;
          best_scores = scores;
        }
      }
    }

    if (!found) {
      result.trace.push_back({3, iteration, "-", kNaN, "stopped", "no eligible pairs"});
      break;
    }
    const bool drop = maximize ? best_f <= 1.0 : best_f >= 1.0;
    const std::string subject =
        pair_subject(items[best_i].variables, items[best_j].variables);
    if (!drop) {
      result.trace.push_back({3, iteration, subject, best_f, "stopped",
                              "a_i=" + format_g17(best_scores.a_i) +
                                  " a_j=" + format_g17(best_scores.a_j) +
                                  " a_ij_bar=" + format_g17(best_scores.a_ij_bar)});
      break;
    }
    // Drop the weaker member; on an exact tie the one whose first variable
    // index is larger goes, so the extremal-score candidate always survives.
    std::size_t victim;
    if (best_scores.a_i != best_scores.a_j) {
      const bool i_weaker = maximize ? best_scores.a_i < best_scores.a_j
                                     : best_scores.a_i > best_scores.a_j;
      victim = i_weaker ? best_i : best_j;
    } else {
      victim = items[best_i].variables.front() > items[best_j].variables.front() ? best_i
                                                                                 : best_j;
    }
    result.trace.push_back({3, iteration, subject, best_f, "dropped",
                            "phalanx=" + variables_to_string(items[victim].variables) +
                                " a_i=" + format_g17(best_scores.a_i) +
                                " a_j=" + format_g17(best_scores.a_j) +
                                " a_ij_bar=" + format_g17(best_scores.a_ij_bar)});
    items.erase(items.begin() + static_cast<std::ptrdiff_t>(victim));
  }

  result.finals = std::move(items);
  return result;
}

ApfResult run_apf(const BlockedDataset& ds, const MetricSpec& metric,
                  const ApfConfig& config) {
  if (!ds.has_labels()) throw ValidationError("phalanx formation requires labeled data");

  const FoldAssignment folds = make_folds(ds, config.v, config.seed);
  ReferenceDistribution reference = permutation_reference(
      ds, metric, config.n_perm, mix_seed(config.seed, kReferenceStream), config.jobs);

  GroupEvaluator cache(ds, folds, metric, config.ridge, config.jobs);
  std::vector<TraceEvent> trace;

  FilterVariablesResult phase1 =
      filter_variables(ds, folds, metric, reference, config.ridge, config.jobs, &cache);
  trace.insert(trace.end(), phase1.trace.begin(), phase1.trace.end());

  bool degenerate = false;
  std::vector<int> survivors = std::move(phase1.survivors);
  if (survivors.empty()) {
    // Nothing passed the reference cut: keep the single best variable so the
    // downstream phases and the ensemble stay defined.
    int best = 0;
    double best_score = cache.eval({0}).score;
    for (int i = 1; i < ds.d_vars(); ++i) {
      const double score = cache.eval({i}).score;
      if (metric.better(score, best_score)) {
        best = i;
        best_score = score;
      }
    }
    survivors.push_back(best);
    degenerate = true;
    trace.push_back({1, 0, "x" + std::to_string(best), best_score, "degenerate_keep",
                     "all variables filtered; retaining the best single variable"});
  }

  MergePhaseResult phase2 =
      merge_phase(ds, folds, survivors, metric, config.ridge, config.jobs, &cache);
  trace.insert(trace.end(), phase2.trace.begin(), phase2.trace.end());

  FilterPhalanxesResult phase3 = filter_phalanxes(ds, folds, phase2.candidates, metric,
                                                  config.ridge, config.jobs, &cache);
  trace.insert(trace.end(), phase3.trace.begin(), phase3.trace.end());

  return ApfResult{metric,
                   std::move(survivors),
                   std::move(phase2.candidates),
                   std::move(phase3.finals),
                   std::move(trace),
                   std::move(reference),
                   degenerate,
                   config};
}

}  // namespace phalanx
