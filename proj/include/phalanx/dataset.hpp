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
#ifndef PHALANX_DATASET_HPP_
#define PHALANX_DATASET_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phalanx {

// Column roles for the headerless delimited files. Roles are declared, never
// inferred: test files lack the label column and silent misparsing would be
// invisible downstream. Remaining columns, left to right, are the features.
struct Schema {
  enum class Delim { Auto, Whitespace, Comma };

  int block_col = 0;
  std::optional<int> case_col;
  std::optional<int> label_col;
  Delim delim = Delim::Auto;
  // Training loads reject blocks without a single positive; scoring loads
  // must not, since metric evaluation may be skipped or filtered later.
  bool require_block_positives = false;
};

// Parses "block=0,label=1,case=2,delim=comma". Only "block" has a default.
Schema parse_schema(const std::string& text);

// Immutable blocked two-class dataset: the unit of all evaluation. Blocks
// are keyed by their literal identifier token; rows keep file order.
class BlockedDataset {
 public:
  static BlockedDataset make(Eigen::MatrixXd features,
                             std::optional<std::vector<int>> labels,
                             std::vector<std::string> block_ids,
                             std::optional<std::vector<std::string>> case_ids,
                             bool require_block_positives = false);

  int n_cases() const { return static_cast<int>(features_.rows()); }
  int d_vars() const { return static_cast<int>(features_.cols()); }
  bool has_labels() const { return labels_.has_value(); }
  bool has_case_ids() const { return case_ids_.has_value(); }

  const Eigen::MatrixXd& features() const { return features_; }
  const std::vector<int>& labels() const;
  const std::vector<std::string>& block_ids() const { return block_ids_; }
  const std::vector<std::string>& case_ids() const;

  // Distinct blocks in first-appearance order and their member rows.
  const std::vector<std::string>& blocks() const { return blocks_; }
  const std::vector<std::vector<int>>& block_rows() const { return block_rows_; }
  int block_of_row(int row) const { return row_block_[static_cast<std::size_t>(row)]; }

  int n_positives() const;
  int positives_in_block(int block_index) const;

  // New dataset restricted to the given rows (file order preserved).
  BlockedDataset subset_rows(const std::vector<int>& rows) const;

 private:
  BlockedDataset() = default;

  Eigen::MatrixXd features_;
  std::optional<std::vector<int>> labels_;
  std::vector<std::string> block_ids_;
  std::optional<std::vector<std::string>> case_ids_;
  std::vector<std::string> blocks_;
  std::vector<std::vector<int>> block_rows_;
  std::vector<int> row_block_;
};

BlockedDataset load_dataset(const std::string& path, const Schema& schema);

// Writes block [case] [label] features... with 17-digit feature formatting,
// so a reload reproduces every double bit-exactly.
void write_dataset(const BlockedDataset& ds, const std::string& path);

// Prediction rows: block id, case id, probability (fixed 6 decimals),
// one row per case in dataset order.
void write_predictions(const std::string& path, const BlockedDataset& ds,
                       std::span<const double> probabilities);

// Reads a prediction file back, checking row count and per-row block ids
// against the dataset it claims to score.
std::vector<double> read_predictions(const std::string& path, const BlockedDataset& ds);

// Block-level cross-validation assignment, shared by every evaluation in a
// run. Depends only on the block key set, v, and seed — not on row order.
struct FoldAssignment {
  std::map<std::string, int> block_to_fold;
  int v = 0;
  std::uint64_t seed = 0;
};

// Sorts block keys, shuffles with the seeded stream, deals round-robin.
// Fold sizes (in blocks) differ by at most one.
FoldAssignment make_folds(const BlockedDataset& ds, int v, std::uint64_t seed);

}  // namespace phalanx

#endif  // PHALANX_DATASET_HPP_
