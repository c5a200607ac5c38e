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
#include "phalanx/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "phalanx/error.hpp"
#include "phalanx/rng.hpp"
#include "phalanx/util.hpp"

namespace phalanx {

namespace {

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

}  // namespace

Schema parse_schema(const std::string& text) {
  Schema schema;
  for (std::string_view item : split_char(text, ',')) {
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("schema: expected key=value, got '" + std::string(item) + "'");
    }
    const std::string_view key = item.substr(0, eq);
    const std::string_view value = item.substr(eq + 1);
    if (key == "delim") {
      if (value == "auto") {
        schema.delim = Schema::Delim::Auto;
      } else if (value == "ws" || value == "whitespace") {
        schema.delim = Schema::Delim::Whitespace;
      } else if (value == "comma") {
        schema.delim = Schema::Delim::Comma;
      } else {
        throw ParseError("schema: unknown delimiter '" + std::string(value) + "'");
      }
      continue;
    }
    long long col = 0;
    if (key == "case" && value == "none") {
      schema.case_col.reset();
      continue;
    }
    if (key == "label" && value == "none") {
      schema.label_col.reset();
      continue;
    }
    if (!parse_int(value, col) || col < 0) {
      throw ParseError("schema: bad column index in '" + std::string(item) + "'");
    }
    if (key == "block") {
      schema.block_col = static_cast<int>(col);
    } else if (key == "case") {
      schema.case_col = static_cast<int>(col);
    } else if (key == "label") {
      schema.label_col = static_cast<int>(col);
    } else {
      throw ParseError("schema: unknown key '" + std::string(key) + "'");
    }
  }
  std::set<int> roles{schema.block_col};
  if (schema.case_col && !roles.insert(*schema.case_col).second) {
    throw ParseError("schema: column roles overlap");
  }
  if (schema.label_col && !roles.insert(*schema.label_col).second) {
    throw ParseError("schema: column roles overlap");
  }
  return schema;
}

BlockedDataset BlockedDataset::make(Eigen::MatrixXd features,
                                    std::optional<std::vector<int>> labels,
                                    std::vector<std::string> block_ids,
                                    std::optional<std::vector<std::string>> case_ids,
                                    bool require_block_positives) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n == 0) throw ValidationError("dataset has no cases");
  if (features.cols() < 1) throw ValidationError("dataset needs at least one feature");
  if (block_ids.size() != n) throw ValidationError("block ids do not match case count");
  if (labels && labels->size() != n) throw ValidationError("labels do not match case count");
  if (case_ids && case_ids->size() != n) throw ValidationError("case ids do not match case count");
  if (!features.allFinite()) throw ValidationError("feature matrix contains non-finite values");
  if (labels) {
    for (std::size_t i = 0; i < n; ++i) {
      const int y = (*labels)[i];
      if (y != 0 && y != 1) {
        throw ValidationError("label at row " + std::to_string(i + 1) + " is not 0 or 1");
      }
    }
  }

  BlockedDataset ds;
  ds.features_ = std::move(features);
  ds.labels_ = std::move(labels);
  ds.block_ids_ = std::move(block_ids);
  ds.case_ids_ = std::move(case_ids);

  ds.row_block_.resize(n);
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = index.emplace(ds.block_ids_[i], static_cast<int>(ds.blocks_.size()));
    if (inserted) {
      ds.blocks_.push_back(ds.block_ids_[i]);
      ds.block_rows_.emplace_back();
    }
    ds.row_block_[i] = it->second;
    ds.block_rows_[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(i));
  }

  if (require_block_positives) {
    if (!ds.labels_) throw ValidationError("training data requires a label column");
    for (std::size_t b = 0; b < ds.blocks_.size(); ++b) {
      if (ds.positives_in_block(static_cast<int>(b)) == 0) {
        throw ValidationError("training block '" + ds.blocks_[b] + "' has no positive cases");
      }
    }
  }
  return ds;
}

const std::vector<int>& BlockedDataset::labels() const {
  if (!labels_) throw ValidationError("dataset has no labels");
  return *labels_;
}

const std::vector<std::string>& BlockedDataset::case_ids() const {
  if (!case_ids_) throw ValidationError("dataset has no case ids");
  return *case_ids_;
}

int BlockedDataset::n_positives() const {
  const auto& y = labels();
  int h = 0;
  for (int v : y) h += v;
  return h;
}

int BlockedDataset::positives_in_block(int block_index) const {
  const auto& y = labels();
  int h = 0;
  for (int row : block_rows_[static_cast<std::size_t>(block_index)]) {
    h += y[static_cast<std::size_t>(row)];
  }
  return h;
}

BlockedDataset BlockedDataset::subset_rows(const std::vector<int>& rows) const {
  if (rows.empty()) throw ValidationError("row subset is empty");
  Eigen::MatrixXd feats(static_cast<Eigen::Index>(rows.size()), features_.cols());
  std::vector<std::string> blocks;
  blocks.reserve(rows.size());
  std::optional<std::vector<int>> labels;
  if (labels_) labels.emplace();
  std::optional<std::vector<std::string>> cases;
  if (case_ids_) cases.emplace();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<std::size_t>(rows[k]);
    feats.row(static_cast<Eigen::Index>(k)) = features_.row(static_cast<Eigen::Index>(r));
    blocks.push_back(block_ids_[r]);
    if (labels) labels->push_back((*labels_)[r]);
    if (cases) cases->push_back((*case_ids_)[r]);
  }
  return make(std::move(feats), std::move(labels), std::move(blocks), std::move(cases));
}

BlockedDataset load_dataset(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file '" + path + "'");

  Schema::Delim delim = schema.delim;
  std::vector<std::vector<double>> feature_rows;
  std::vector<std::string> block_ids;
  std::optional<std::vector<std::string>> case_ids;
  if (schema.case_col) case_ids.emplace();
  std::optional<std::vector<int>> labels;
  if (schema.label_col) labels.emplace();

  int n_role_cols = 1 + (schema.case_col ? 1 : 0) + (schema.label_col ? 1 : 0);
  int max_role_col = schema.block_col;
  if (schema.case_col) max_role_col = std::max(max_role_col, *schema.case_col);
  if (schema.label_col) max_role_col = std::max(max_role_col, *schema.label_col);

  std::string raw;
  std::size_t line_no = 0;
  long long expected_cols = -1;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (is_blank(line)) continue;
    if (delim == Schema::Delim::Auto) {
      delim = line.find(',') != std::string_view::npos ? Schema::Delim::Comma
                                                       : Schema::Delim::Whitespace;
    }
    const auto tokens = delim == Schema::Delim::Comma ? split_char(line, ',')
                                                      : split_whitespace(line);
    const auto n_cols = static_cast<long long>(tokens.size());
    if (expected_cols < 0) {
      expected_cols = n_cols;
      if (expected_cols <= max_role_col || expected_cols < n_role_cols + 1) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": too few columns for the declared schema");
      }
    } else if (n_cols != expected_cols) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(expected_cols) + " columns, found " +
                       std::to_string(n_cols));
    }

    block_ids.emplace_back(tokens[static_cast<std::size_t>(schema.block_col)]);
    if (case_ids) case_ids->emplace_back(tokens[static_cast<std::size_t>(*schema.case_col)]);
    if (labels) {
      const auto tok = tokens[static_cast<std::size_t>(*schema.label_col)];
      double y = 0.0;
      if (!parse_double(tok, y) || (y != 0.0 && y != 1.0)) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": label '" + std::string(tok) + "' is not 0 or 1");
      }
      labels->push_back(static_cast<int>(y));
    }

    std::vector<double> feats;
    feats.reserve(tokens.size() - static_cast<std::size_t>(n_role_cols));
    for (std::size_t c = 0; c < tokens.size(); ++c) {
      const int ci = static_cast<int>(c);
      if (ci == schema.block_col) continue;
      if (schema.case_col && ci == *schema.case_col) continue;
      if (schema.label_col && ci == *schema.label_col) continue;
      double x = 0.0;
      if (!parse_double(tokens[c], x)) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": unreadable feature '" +
                         std::string(tokens[c]) + "'");
      }
      if (!std::isfinite(x)) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": non-finite feature value '" + std::string(tokens[c]) + "'");
      }
      feats.push_back(x);
    }
    feature_rows.push_back(std::move(feats));
  }
  if (feature_rows.empty()) throw ValidationError(path + ": no data rows");

  const auto n = static_cast<Eigen::Index>(feature_rows.size());
  const auto d = static_cast<Eigen::Index>(feature_rows.front().size());
  Eigen::MatrixXd features(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      features(i, j) = feature_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return BlockedDataset::make(std::move(features), std::move(labels), std::move(block_ids),
                              std::move(case_ids), schema.require_block_positives);
}

void write_dataset(const BlockedDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset file '" + path + "'");
  const int n = ds.n_cases();
  const int d = ds.d_vars();
  for (int i = 0; i < n; ++i) {
    out << ds.block_ids()[static_cast<std::size_t>(i)];
    if (ds.has_case_ids()) out << ' ' << ds.case_ids()[static_cast<std::size_t>(i)];
    if (ds.has_labels()) out << ' ' << ds.labels()[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) out << ' ' << format_g17(ds.features()(i, j));
    out << '\n';
  }
  if (!out) throw ValidationError("failed writing dataset file '" + path + "'");
}

void write_predictions(const std::string& path, const BlockedDataset& ds,
                       std::span<const double> probabilities) {
  if (static_cast<int>(probabilities.size()) != ds.n_cases()) {
    throw ValidationError("prediction vector does not match dataset size");
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write predictions file '" + path + "'");
  for (int i = 0; i < ds.n_cases(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const std::string case_id =
        ds.has_case_ids() ? ds.case_ids()[idx] : std::to_string(i + 1);
    out << ds.block_ids()[idx] << ' ' << case_id << ' '
        << format_fixed(probabilities[idx], 6) << '\n';
  }
  if (!out) throw ValidationError("failed writing predictions file '" + path + "'");
}

std::vector<double> read_predictions(const std::string& path, const BlockedDataset& ds) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open predictions file '" + path + "'");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(ds.n_cases()));
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (is_blank(line)) continue;
    const auto tokens = split_whitespace(line);
    if (tokens.size() != 3) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 'block case probability'");
    }
    const auto row = values.size();
    if (row >= static_cast<std::size_t>(ds.n_cases())) {
      throw ValidationError(path + ": more prediction rows than dataset cases");
    }
    if (tokens[0] != ds.block_ids()[row]) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": block id '" + std::string(tokens[0]) +
                            "' does not match dataset block '" + ds.block_ids()[row] + "'");
    }
    double p = 0.0;
    if (!parse_double(tokens[2], p) || !std::isfinite(p)) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": unreadable probability");
    }
    values.push_back(p);
  }
  if (values.size() != static_cast<std::size_t>(ds.n_cases())) {
    throw ValidationError(path + ": prediction rows (" + std::to_string(values.size()) +
                          ") do not cover the dataset (" + std::to_string(ds.n_cases()) + ")");
  }
  return values;
}

FoldAssignment make_folds(const BlockedDataset& ds, int v, std::uint64_t seed) {
  if (!ds.has_labels()) throw ValidationError("fold assignment requires labeled data");
  if (v < 1) throw ValidationError("fold count must be at least 1");
  const auto n_blocks = static_cast<int>(ds.blocks().size());
  if (n_blocks < v) {
    throw ValidationError("fewer blocks (" + std::to_string(n_blocks) + ") than folds (" +
                          std::to_string(v) + ")");
  }
  std::vector<std::string> keys = ds.blocks();
  std::sort(keys.begin(), keys.end());
  Rng rng(seed);
  rng.shuffle(keys);
  FoldAssignment folds;
  folds.v = v;
  folds.seed = seed;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    folds.block_to_fold[keys[i]] = static_cast<int>(i % static_cast<std::size_t>(v));
  }
  return folds;
}

}  // namespace phalanx
