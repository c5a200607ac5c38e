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
#ifndef PHALANX_MODEL_IO_HPP_
#define PHALANX_MODEL_IO_HPP_

#include <string>
#include <vector>

#include "phalanx/ensemble.hpp"

namespace phalanx {

inline constexpr int kModelFormatVersion = 1;

// Versioned JSON persistence for trained ensembles. One member = a single
// metric's EM; two members = the metric ensemble (APR then RKL). Floating
// point is serialized as 17-significant-digit decimal strings so that
// write -> read -> write is byte-identical.
struct ModelDocument {
  int version = kModelFormatVersion;
  std::vector<EnsembleModel> members;

  bool is_emm() const { return members.size() > 1; }
};

std::string serialize_model(const ModelDocument& doc);
ModelDocument parse_model(const std::string& json_text);

void save_model(const std::string& path, const ModelDocument& doc);
ModelDocument load_model(const std::string& path);

// Mean over member EM predictions (a single member predicts as its EM).
ProbabilityVector predict_document(const ModelDocument& doc, const BlockedDataset& ds);

}  // namespace phalanx

#endif  // PHALANX_MODEL_IO_HPP_
