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
#include "phalanx/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phalanx/error.hpp"
#include "phalanx/util.hpp"

namespace phalanx {

namespace {

using Json = nlohmann::ordered_json;

std::string direction_name(Direction d) {
  return d == Direction::Maximize ? "maximize" : "minimize";
}

Direction direction_from_name(const std::string& name) {
  if (name == "maximize") return Direction::Maximize;
  if (name == "minimize") return Direction::Minimize;
  throw ParseError("model: unknown direction '" + name + "'");
}

double double_from_string(const Json& j, const char* field) {
  if (!j.is_string()) throw ParseError(std::string("model: field '") + field + "' must be a string");
  double out = 0.0;
  if (!parse_double(j.get_ref<const std::string&>(), out)) {
    throw ParseError(std::string("model: unreadable number in field '") + field + "'");
  }
  return out;
}

Json member_to_json(const EnsembleModel& em) {
  Json m;
  m["metric"] = {{"id", to_string(em.metric.id)},
                 {"direction", direction_name(em.metric.direction)},
                 {"alpha", format_g17(em.metric.alpha)}};
  m["seed"] = em.provenance.seed;
  m["folds"] = em.provenance.v;
  m["n_perm"] = em.provenance.n_perm;
  m["ridge"] = format_g17(em.provenance.ridge);
  m["n_features"] = em.provenance.n_features;
  Json phalanxes = Json::array();
  for (std::size_t i = 0; i < em.phalanxes.size(); ++i) {
    const auto& phalanx = em.phalanxes[i];
    const auto& model = em.models[i];
    Json p;
    p["variables"] = phalanx.variables;
    p["cv_score"] = format_g17(phalanx.cv_score);
    p["intercept"] = format_g17(model.intercept);
    Json coefs = Json::array();
    for (double c : model.coefficients) coefs.push_back(format_g17(c));
    p["coefficients"] = std::move(coefs);
    p["converged"] = model.converged;
    p["iterations"] = model.iterations;
    phalanxes.push_back(std::move(p));
  }
  m["phalanxes"] = std::move(phalanxes);
  return m;
}

EnsembleModel member_from_json(const Json& m) {
  EnsembleModel em;
  const auto& metric = m.at("metric");
  em.metric.id = metric_id_from_string(metric.at("id").get<std::string>());
  em.metric.direction = direction_from_name(metric.at("direction").get<std::string>());
  em.metric.alpha = double_from_string(metric.at("alpha"), "alpha");
  em.provenance.seed = m.at("seed").get<std::uint64_t>();
  em.provenance.v = m.at("folds").get<int>();
  em.provenance.n_perm = m.at("n_perm").get<int>();
  em.provenance.ridge = double_from_string(m.at("ridge"), "ridge");
  em.provenance.n_features = m.at("n_features").get<int>();
  for (const auto& p : m.at("phalanxes")) {
    Phalanx phalanx;
    phalanx.variables = p.at("variables").get<std::vector<int>>();
    phalanx.cv_score = double_from_string(p.at("cv_score"), "cv_score");
    FittedModel model;
    model.variables = phalanx.variables;
    model.intercept = double_from_string(p.at("intercept"), "intercept");
    for (const auto& c : p.at("coefficients")) {
      model.coefficients.push_back(double_from_string(c, "coefficients"));
    }
    if (model.coefficients.size() != model.variables.size()) {
      throw ParseError("model: coefficients and variables differ in length");
    }
    model.converged = p.at("converged").get<bool>();
    model.iterations = p.at("iterations").get<int>();
    model.pinned.assign(model.variables.size(), 0);
    em.phalanxes.push_back(std::move(phalanx));
    em.models.push_back(std::move(model));
  }
  if (em.phalanxes.empty()) throw ParseError("model: member has no phalanxes");
  return em;
}

}  // namespace

std::string serialize_model(const ModelDocument& doc) {
  if (doc.members.empty()) throw ValidationError("model document has no members");
  Json j;
  j["format"] = "phalanx-model";
  j["version"] = doc.version;
  Json members = Json::array();
  for (const auto& em : doc.members) members.push_back(member_to_json(em));
  j["members"] = std::move(members);
  return j.dump(2) + "\n";
}

ModelDocument parse_model(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model: invalid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "phalanx-model") {
      throw ParseError("model: not a phalanx model document");
    }
    ModelDocument doc;
    doc.version = j.at("version").get<int>();
    if (doc.version != kModelFormatVersion) {
      throw ValidationError("model: unsupported format version " +
                            std::to_string(doc.version));
    }
    for (const auto& m : j.at("members")) doc.members.push_back(member_from_json(m));
    if (doc.members.empty()) throw ParseError("model: no members");
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model: malformed document: ") + e.what());
  }
}

void save_model(const std::string& path, const ModelDocument& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write model file '" + path + "'");
  out << serialize_model(doc);
  if (!out) throw ValidationError("failed writing model file '" + path + "'");
}

ModelDocument load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

ProbabilityVector predict_document(const ModelDocument& doc, const BlockedDataset& ds) {
  if (doc.members.empty()) throw ValidationError("model document has no members");
  std::vector<ProbabilityVector> parts;
  parts.reserve(doc.members.size());
  for (const auto& em : doc.members) parts.push_back(predict_em(em, ds));
  if (parts.size() == 1) return parts.front();
  std::string provenance = "emm:";
  for (std::size_t i = 0; i < doc.members.size(); ++i) {
    if (i > 0) provenance += "&";
    provenance += to_string(doc.members[i].metric.id);
  }
  return mean_probability(parts, provenance);
}

}  // namespace phalanx
