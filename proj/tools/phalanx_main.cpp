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
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "phalanx/apf.hpp"
#include "phalanx/dataset.hpp"
#include "phalanx/ensemble.hpp"
#include "phalanx/error.hpp"
#include "phalanx/logistic.hpp"
#include "phalanx/metrics.hpp"
#include "phalanx/model_io.hpp"
#include "phalanx/util.hpp"

namespace {

using namespace phalanx;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct TrainArgs {
  std::string train_path;
  std::string schema_text;
  std::string metric = "apr";
  std::string model_path;
  std::string trace_path;
  std::uint64_t seed = 0;
  int folds = 10;
  int n_perm = 2000;
  std::optional<double> alpha;
  double ridge = kDefaultRidge;
  int jobs = 1;
};

struct PredictArgs {
  std::string model_path;
  std::string test_path;
  std::string schema_text;
  std::string out_path;
};

struct EvalArgs {
  std::string test_path;
  std::string schema_text;
  std::string pred_path;
  std::string model_path;
  bool per_block = false;
  bool skip_empty_blocks = false;
  std::string hit_curve_dir;
};

struct DiagArgs {
  std::string test_path;
  std::string schema_text;
  std::string pred_a;
  std::string pred_b;
  std::string out_path;
  std::string hit_curve_dir;
};

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

// Matches the precision of the prediction wire format, so evaluating a model
// directly agrees exactly with evaluating its written prediction file.
double round6(double p) {
  double out = p;
  parse_double(format_fixed(p, 6), out);
  return out;
}

// Re-raises data and numeric errors with the pipeline stage in front, so a
// failure names where it happened.
template <class Fn>
auto with_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError(stage + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(stage + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(stage + ": " + e.what());
  }
}

MetricSpec metric_spec_for(const std::string& name, const std::optional<double>& alpha) {
  MetricSpec spec;
  if (name == "apr") {
    spec = MetricSpec::apr();
  } else if (name == "rkl") {
    spec = MetricSpec::rkl();
  } else {
    throw ValidationError("unknown training metric '" + name + "'");
  }
  if (alpha) spec.alpha = *alpha;
  return spec;
}

void print_phase_counts(const BlockedDataset& ds, const std::vector<ApfResult>& runs) {
  std::printf("%-8s %12s %15s %21s %17s\n", "Metric", "Vars(total)", "Vars(filtered)",
              "Phalanxes(candidate)", "Phalanxes(final)");
  for (const auto& run : runs) {
    std::printf("%-8s %12d %15zu %21zu %17zu\n", to_string(run.metric.id).c_str(),
                ds.d_vars(), run.survivors_phase1.size(), run.candidates_phase2.size(),
                run.final_phase3.size());
  }
  for (const auto& run : runs) {
    for (std::size_t i = 0; i < run.final_phase3.size(); ++i) {
      const auto& phalanx = run.final_phase3[i];
      std::printf("%s phalanx %zu: cv_score=%s vars=%s\n", to_string(run.metric.id).c_str(),
                  i + 1, format_fixed(phalanx.cv_score, 6).c_str(),
                  variables_to_string(phalanx.variables).c_str());
    }
  }
}

int cmd_train(const TrainArgs& args) {
  Schema schema = parse_schema(args.schema_text);
  schema.require_block_positives = true;
  const BlockedDataset ds = with_stage("loading training data",
                                       [&] { return load_dataset(args.train_path, schema); });

  ApfConfig config{args.folds, args.n_perm, args.seed, args.ridge, args.jobs};
  std::vector<MetricSpec> specs;
  if (args.metric == "emm") {
    if (args.alpha) {
      throw ValidationError("--alpha applies to a single metric; emm runs both defaults");
    }
    specs = {MetricSpec::apr(), MetricSpec::rkl()};
  } else {
    specs = {metric_spec_for(args.metric, args.alpha)};
  }

  ModelDocument doc;
  std::vector<ApfResult> runs;
  for (const auto& spec : specs) {
    ApfResult apf = with_stage("phalanx formation (" + to_string(spec.id) + ")",
                               [&] { return run_apf(ds, spec, config); });
    doc.members.push_back(with_stage("fitting ensemble (" + to_string(spec.id) + ")",
                                     [&] { return build_em(ds, apf, config.ridge); }));
    runs.push_back(std::move(apf));
  }

  with_stage("writing model", [&] { save_model(args.model_path, doc); });
  if (!args.trace_path.empty()) {
    std::ofstream out(args.trace_path);
    if (!out) throw ValidationError("cannot write trace file '" + args.trace_path + "'");
    out << "# phase\titeration\tsubject\tcriterion\taction\tdetail\n";
    for (const auto& run : runs) {
      out << "# metric=" << to_string(run.metric.id) << "\n";
      for (const auto& event : run.trace) out << event.to_line() << '\n';
    }
    if (!out) throw ValidationError("failed writing trace file '" + args.trace_path + "'");
  }
  print_phase_counts(ds, runs);
  std::printf("model written to %s\n", args.model_path.c_str());
  return 0;
}

int cmd_predict(const PredictArgs& args) {
  const ModelDocument doc =
      with_stage("loading model", [&] { return load_model(args.model_path); });
  const Schema schema = parse_schema(args.schema_text);
  const BlockedDataset ds =
      with_stage("loading data", [&] { return load_dataset(args.test_path, schema); });
  const ProbabilityVector pv =
      with_stage("prediction", [&] { return predict_document(doc, ds); });
  with_stage("writing predictions",
             [&] { write_predictions(args.out_path, ds, pv.values); });
  std::printf("%d predictions written to %s\n", ds.n_cases(), args.out_path.c_str());
  return 0;
}

struct ScoredDataset {
  BlockedDataset ds;
  std::vector<double> scores;
};

// Applies --skip-empty-blocks: positive-free blocks are either reported and
// removed, or rejected.
ScoredDataset restrict_to_scorable(BlockedDataset ds, std::vector<double> scores,
                                   bool skip_empty_blocks) {
  std::vector<std::string> empty;
  for (std::size_t b = 0; b < ds.blocks().size(); ++b) {
    if (ds.positives_in_block(static_cast<int>(b)) == 0) empty.push_back(ds.blocks()[b]);
  }
  if (empty.empty()) return {std::move(ds), std::move(scores)};
  std::string names;
  for (const auto& name : empty) names += (names.empty() ? "" : ", ") + name;
  if (!skip_empty_blocks) {
    throw ValidationError("blocks with no positive cases: " + names +
                          " (use --skip-empty-blocks to exclude them)");
  }
  std::fprintf(stderr, "excluding %zu positive-free block(s): %s\n", empty.size(),
               names.c_str());
  std::vector<bool> keep_block(ds.blocks().size());
  for (std::size_t b = 0; b < ds.blocks().size(); ++b) {
    keep_block[b] = ds.positives_in_block(static_cast<int>(b)) > 0;
  }
  std::vector<int> keep_rows;
  std::vector<double> kept_scores;
  for (int i = 0; i < ds.n_cases(); ++i) {
    if (keep_block[static_cast<std::size_t>(ds.block_of_row(i))]) {
      keep_rows.push_back(i);
      kept_scores.push_back(scores[static_cast<std::size_t>(i)]);
    }
  }
  return {ds.subset_rows(keep_rows), std::move(kept_scores)};
}

int cmd_eval(const EvalArgs& args) {
  const Schema schema = parse_schema(args.schema_text);
  BlockedDataset loaded =
      with_stage("loading data", [&] { return load_dataset(args.test_path, schema); });
  if (!loaded.has_labels()) {
    throw ValidationError("evaluation requires a label column in the schema");
  }

  std::vector<double> scores;
  if (!args.pred_path.empty()) {
    scores = with_stage("reading predictions",
                        [&] { return read_predictions(args.pred_path, loaded); });
  } else {
    const ModelDocument doc =
        with_stage("loading model", [&] { return load_model(args.model_path); });
    ProbabilityVector pv =
        with_stage("prediction", [&] { return predict_document(doc, loaded); });
    scores = std::move(pv.values);
    for (double& s : scores) s = round6(s);
  }

  auto [ds, kept] = restrict_to_scorable(std::move(loaded), std::move(scores),
                                         args.skip_empty_blocks);

  const double apr = block_average(ds, kept, MetricSpec::apr());
  const double rkl = block_average(ds, kept, MetricSpec::rkl());
  const double top1 = block_average(ds, kept, MetricSpec::top1());
  std::printf("APR  %s\n", format_fixed(apr, 6).c_str());
  std::printf("TOP1 %s\n", format_fixed(top1, 6).c_str());
  std::printf("RKL  %s\n", format_fixed(rkl, 6).c_str());

  if (args.per_block || !args.hit_curve_dir.empty()) {
    if (args.per_block) {
      std::printf("# block\tn\th\tAPR\tRKL\tTOP1\n");
    }
    if (!args.hit_curve_dir.empty()) {
      std::filesystem::create_directories(args.hit_curve_dir);
    }
    const auto& y = ds.labels();
    for (std::size_t b = 0; b < ds.blocks().size(); ++b) {
      std::vector<int> bl;
      std::vector<double> bs;
      for (int r : ds.block_rows()[b]) {
        bl.push_back(y[static_cast<std::size_t>(r)]);
        bs.push_back(kept[static_cast<std::size_t>(r)]);
      }
      if (args.per_block) {
        std::printf("%s\t%zu\t%d\t%s\t%d\t%d\n", ds.blocks()[b].c_str(), bl.size(),
                    ds.positives_in_block(static_cast<int>(b)),
                    format_fixed(apr_block(bl, bs), 6).c_str(), rkl_block(bl, bs),
                    top1_block(bl, bs));
      }
      if (!args.hit_curve_dir.empty()) {
        write_hit_curve(args.hit_curve_dir + "/hits_" + safe_name(ds.blocks()[b]) + ".tsv",
                        hit_curve(bl, bs));
      }
    }
  }
  return 0;
}

int cmd_diagnostics(const DiagArgs& args) {
  const Schema schema = parse_schema(args.schema_text);
  const BlockedDataset ds =
      with_stage("loading data", [&] { return load_dataset(args.test_path, schema); });
  if (!ds.has_labels()) {
    throw ValidationError("diagnostics require a label column in the schema");
  }
  ProbabilityVector a{with_stage("reading predictions",
                                 [&] { return read_predictions(args.pred_a, ds); }),
                      "pred_a"};
  ProbabilityVector b{with_stage("reading predictions",
                                 [&] { return read_predictions(args.pred_b, ds); }),
                      "pred_b"};

  const RankDiagnostics diag = rank_diagnostics(ds, a, b);
  std::printf("# range\tpositives\ta_wins\tties\tb_wins\n");
  for (const auto& bin : diag.bins) {
    std::printf("[%s, %s)\t%d\t%d\t%d\t%d\n", format_fixed(bin.lo, 5).c_str(),
                format_fixed(bin.hi, 5).c_str(), bin.positives, bin.a_wins, bin.ties,
                bin.b_wins);
  }
  if (!args.out_path.empty()) write_diagnostics(args.out_path, diag);

  if (!args.hit_curve_dir.empty()) {
    std::filesystem::create_directories(args.hit_curve_dir);
    const auto& y = ds.labels();
    for (std::size_t blk = 0; blk < ds.blocks().size(); ++blk) {
      std::vector<int> bl;
      std::vector<double> sa, sb;
      for (int r : ds.block_rows()[blk]) {
        bl.push_back(y[static_cast<std::size_t>(r)]);
        sa.push_back(a.values[static_cast<std::size_t>(r)]);
        sb.push_back(b.values[static_cast<std::size_t>(r)]);
      }
      const std::string stem = args.hit_curve_dir + "/hits_" + safe_name(ds.blocks()[blk]);
      write_hit_curve(stem + "_a.tsv", hit_curve(bl, sa));
      write_hit_curve(stem + "_b.tsv", hit_curve(bl, sb));
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensembles of logistic models on phalanxes of feature variables,\n"
               "for ranking rare-class cases in blocked two-class data"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* cmd_t = app.add_subcommand("train", "Form phalanxes and fit the ensemble");
  cmd_t->add_option("--train", train.train_path, "Training data file")->required();
  cmd_t->add_option("--schema", train.schema_text, "Column roles, e.g. block=0,label=1")
      ->required();
  cmd_t->add_option("--metric", train.metric, "Optimization metric: apr, rkl, or emm")
      ->check(CLI::IsMember({"apr", "rkl", "emm"}))
      ->required();
  cmd_t->add_option("--model", train.model_path, "Output model document")->required();
  cmd_t->add_option("--trace", train.trace_path, "Output decision trace");
  cmd_t->add_option("--seed", train.seed, "RNG seed");
  cmd_t->add_option("--folds", train.folds, "Cross-validation folds (block level)")
      ->check(CLI::PositiveNumber);
  cmd_t->add_option("--n-perm", train.n_perm, "Permutation replicates for the reference")
      ->check(CLI::PositiveNumber);
  cmd_t->add_option("--alpha", train.alpha, "Reference quantile cut (single metric only)");
  cmd_t->add_option("--ridge", train.ridge, "Ridge penalty on slopes");
  cmd_t->add_option("--jobs", train.jobs, "Worker threads (never changes results)")
      ->check(CLI::PositiveNumber);

  PredictArgs predict_args;
  auto* cmd_p = app.add_subcommand("predict", "Score a dataset with a trained model");
  cmd_p->add_option("--model", predict_args.model_path, "Model document")->required();
  cmd_p->add_option("--test", predict_args.test_path, "Data file to score")->required();
  cmd_p->add_option("--schema", predict_args.schema_text, "Column roles")->required();
  cmd_p->add_option("--out", predict_args.out_path, "Output predictions file")->required();

  EvalArgs eval_args;
  auto* cmd_e = app.add_subcommand("eval", "Block-averaged APR, RKL, and TOP1");
  cmd_e->add_option("--test", eval_args.test_path, "Labeled data file")->required();
  cmd_e->add_option("--schema", eval_args.schema_text, "Column roles")->required();
  auto* pred_opt = cmd_e->add_option("--pred", eval_args.pred_path, "Predictions file");
  cmd_e->add_option("--model", eval_args.model_path, "Model document")->excludes(pred_opt);
  cmd_e->add_flag("--per-block", eval_args.per_block, "Also print per-block values");
  cmd_e->add_flag("--skip-empty-blocks", eval_args.skip_empty_blocks,
                  "Exclude blocks without positives instead of failing");
  cmd_e->add_option("--hit-curve-dir", eval_args.hit_curve_dir,
                    "Write per-block hit curves into this directory");

  DiagArgs diag_args;
  auto* cmd_d = app.add_subcommand("diagnostics",
                                   "Win/tie/loss of two prediction sets by rank quartile");
  cmd_d->add_option("--test", diag_args.test_path, "Labeled data file")->required();
  cmd_d->add_option("--schema", diag_args.schema_text, "Column roles")->required();
  cmd_d->add_option("--pred-a", diag_args.pred_a, "First predictions file")->required();
  cmd_d->add_option("--pred-b", diag_args.pred_b, "Second predictions file")->required();
  cmd_d->add_option("--out", diag_args.out_path, "Also write the table to this file");
  cmd_d->add_option("--hit-curve-dir", diag_args.hit_curve_dir,
                    "Write per-block, per-method hit curves into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (cmd_t->parsed()) return cmd_train(train);
    if (cmd_p->parsed()) return cmd_predict(predict_args);
    if (cmd_e->parsed()) return cmd_eval(eval_args);
    if (cmd_d->parsed()) return cmd_diagnostics(diag_args);
    std::fprintf(stderr, "no subcommand given\n");
    return kExitUsage;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error (data): %s\n", e.what());
    return kExitData;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error (data): %s\n", e.what());
    return kExitData;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error (numeric): %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
}
