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
#include "phalanx/ensemble.hpp"

#include <algorithm>
#include <fstream>

#include "phalanx/error.hpp"
#include "phalanx/util.hpp"

namespace phalanx {

EnsembleModel build_em(const BlockedDataset& ds, const ApfResult& apf, double ridge) {
  if (apf.final_phase3.empty()) throw ValidationError("no final phalanxes to fit");
  if (!ds.has_labels()) throw ValidationError("ensemble fitting requires labeled data");

  EnsembleModel em;
  em.metric = apf.metric;
  em.phalanxes = apf.final_phase3;
  em.provenance = {apf.config.seed, apf.config.v, apf.config.n_perm, apf.config.ridge,
                   ds.d_vars()};
  em.models.reserve(em.phalanxes.size());
  for (const auto& phalanx : em.phalanxes) {
    try {
      em.models.push_back(fit_logistic(ds, phalanx.variables, ridge));
    } catch (const std::exception& e) {
      throw NumericalError("fit failed for phalanx " +
                           variables_to_string(phalanx.variables) + ": " + e.what());
    }
  }
  return em;
}

ProbabilityVector predict_em(const EnsembleModel& em, const BlockedDataset& ds) {
  if (em.models.empty()) throw ValidationError("ensemble has no models");
  if (ds.d_vars() != em.provenance.n_features) {
    throw ValidationError("dataset has " + std::to_string(ds.d_vars()) +
                          " features but the model was trained with " +
                          std::to_string(em.provenance.n_features));
  }
  std::vector<ProbabilityVector> parts;
  parts.reserve(em.models.size());
  for (const auto& model : em.models) parts.push_back(predict(model, ds));
  return mean_probability(parts, "em:" + to_string(em.metric.id));
}

ProbabilityVector mean_probability(std::span<const ProbabilityVector> parts,
                                   const std::string& provenance) {
  if (parts.empty()) throw ValidationError("mean of zero probability vectors");
  const std::size_t n = parts.front().values.size();
  for (const auto& part : parts) {
    if (part.values.size() != n) {
      throw ValidationError("probability vectors differ in length (" +
                            std::to_string(part.values.size()) + " vs " +
                            std::to_string(n) + ")");
    }
  }
  ProbabilityVector out;
  out.provenance = provenance;
  out.values.assign(n, 0.0);
  for (const auto& part : parts) {
    for (std::size_t i = 0; i < n; ++i) out.values[i] += part.values[i];
  }
  const auto p = static_cast<double>(parts.size());
  for (double& v : out.values) v /= p;
  return out;
}

ProbabilityVector build_emm(const ProbabilityVector& a, const ProbabilityVector& b) {
  const ProbabilityVector parts[2] = {a, b};
  return mean_probability(parts, "emm");
}

namespace {

// 1-based descending within-block ranks with each tie charged at the end of
// its tied group, so a tie never flatters a case.
std::vector<double> block_max_ranks(std::span<const double> scores) {
  const auto n = scores.size();
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    const auto ix = static_cast<std::size_t>(x);
    const auto iy = static_cast<std::size_t>(y);
    if (scores[ix] != scores[iy]) return scores[ix] > scores[iy];
    return x < y;
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start + 1;
    while (end < n && scores[static_cast<std::size_t>(order[end])] ==
                          scores[static_cast<std::size_t>(order[start])]) {
      ++end;
    }
    for (std::size_t k = start; k < end; ++k) {
      ranks[static_cast<std::size_t>(order[k])] = static_cast<double>(end);
    }
    start = end;
  }
  return ranks;
}

}  // namespace

RankDiagnostics rank_diagnostics(const BlockedDataset& ds, const ProbabilityVector& a,
                                 const ProbabilityVector& b) {
  const auto n = static_cast<std::size_t>(ds.n_cases());
  if (a.values.size() != n || b.values.size() != n) {
    throw ValidationError("score vectors do not match dataset size");
  }
  const auto& y = ds.labels();

  RankDiagnostics diag;
  std::vector<double> rank_a_all(n), rank_b_all(n), rank_m_all(n);
  for (std::size_t blk = 0; blk < ds.blocks().size(); ++blk) {
    const auto& rows = ds.block_rows()[blk];
    std::vector<double> sa, sb, sm;
    sa.reserve(rows.size());
    sb.reserve(rows.size());
    sm.reserve(rows.size());
    for (int r : rows) {
      const auto i = static_cast<std::size_t>(r);
      sa.push_back(a.values[i]);
      sb.push_back(b.values[i]);
      sm.push_back((a.values[i] + b.values[i]) / 2.0);
    }
    const auto ra = block_max_ranks(sa);
    const auto rb = block_max_ranks(sb);
    const auto rm = block_max_ranks(sm);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto i = static_cast<std::size_t>(rows[k]);
      rank_a_all[i] = ra[k];
      rank_b_all[i] = rb[k];
      rank_m_all[i] = rm[k];
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] != 1) continue;
    const auto blk = static_cast<std::size_t>(ds.block_of_row(static_cast<int>(i)));
    const auto size = static_cast<double>(ds.block_rows()[blk].size());
    RankDiagnostics::Record rec;
    rec.block = ds.blocks()[blk];
    rec.case_id = ds.has_case_ids() ? ds.case_ids()[i] : std::to_string(i + 1);
    rec.nrank_a = rank_a_all[i] / size;
    rec.nrank_b = rank_b_all[i] / size;
    rec.nrank_mean = rank_m_all[i] / size;
    diag.records.push_back(std::move(rec));
  }
  if (diag.records.empty()) throw ValidationError("no positive cases to diagnose");

  std::vector<double> means;
  means.reserve(diag.records.size());
  for (const auto& rec : diag.records) means.push_back(rec.nrank_mean);
  std::sort(means.begin(), means.end());
  diag.edges = {type1_quantile(means, 0.25), type1_quantile(means, 0.5),
                type1_quantile(means, 0.75)};

  diag.bins[0] = {0.0, diag.edges[0], 0, 0, 0, 0};
  diag.bins[1] = {diag.edges[0], diag.edges[1], 0, 0, 0, 0};
  diag.bins[2] = {diag.edges[1], diag.edges[2], 0, 0, 0, 0};
  diag.bins[3] = {diag.edges[2], 1.0, 0, 0, 0, 0};

  for (const auto& rec : diag.records) {
    std::size_t bin = 3;
    for (std::size_t e = 0; e < diag.edges.size(); ++e) {
      if (rec.nrank_mean < diag.edges[e]) {
        bin = e;
        break;
      }
    }
    auto& row = diag.bins[bin];
    ++row.positives;
    if (rec.nrank_a < rec.nrank_b) {
      ++row.a_wins;
    } else if (rec.nrank_b < rec.nrank_a) {
      ++row.b_wins;
    } else {
      ++row.ties;
    }
  }
  return diag;
}

void write_diagnostics(const std::string& path, const RankDiagnostics& diag) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write diagnostics file '" + path + "'");
  out << "# lo\thi\tpositives\ta_wins\tties\tb_wins\n";
  for (const auto& bin : diag.bins) {
    out << format_g17(bin.lo) << '\t' << format_g17(bin.hi) << '\t' << bin.positives
        << '\t' << bin.a_wins << '\t' << bin.ties << '\t' << bin.b_wins << '\n';
  }
  if (!out) throw ValidationError("failed writing diagnostics file '" + path + "'");
}

}  // namespace phalanx
