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
#include <doctest.h>

#include <regex>
#include <string>

#include "phalanx/dataset.hpp"
#include "phalanx/model_io.hpp"
#include "support/synthetic.hpp"
#include "support/testutil.hpp"

using namespace phalanx;
using testutil::CliResult;
using testutil::read_file;
using testutil::run_cli;
using testutil::TempDir;
using testutil::write_file;

namespace {

std::string planted_file(const TempDir& dir, const std::string& name, std::uint64_t seed) {
  testgen::PlantedSpec spec;
  spec.n_blocks = 12;
  spec.block_size = 40;
  const auto ds = testgen::planted_two_pairs(spec, seed);
  const std::string path = dir.file(name);
  write_dataset(ds, path);
  return path;
}

}  // namespace

TEST_CASE("train, predict, eval pipeline") {
  TempDir dir;
  const std::string train = planted_file(dir, "train.txt", 99);
  const std::string model = dir.file("model.json");
  const std::string trace = dir.file("trace.tsv");

  const CliResult trained = run_cli("train --train " + train +
                                        " --schema block=0,label=1 --metric apr --model " +
                                        model + " --trace " + trace +
                                        " --seed 7 --n-perm 200 --jobs 2",
                                    dir);
  REQUIRE(trained.exit_code == 0);
  INFO(trained.output);
  CHECK(trained.output.find("APR") != std::string::npos);

  SUBCASE("phase counts printed match the trace file") {
    const std::regex row("APR\\s+(\\d+)\\s+(\\d+)\\s+(\\d+)\\s+(\\d+)");
    std::smatch match;
    REQUIRE(std::regex_search(trained.output, match, row));
    const int total = std::stoi(match[1]);
    const int kept_printed = std::stoi(match[2]);
    const int candidates_printed = std::stoi(match[3]);
    const int finals_printed = std::stoi(match[4]);
    CHECK(total == 10);

    const std::string trace_text = read_file(trace);
    int kept = 0, merged = 0, dropped = 0;
    std::istringstream lines(trace_text);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (line.rfind("1\t", 0) == 0 && line.find("\tkept\t") != std::string::npos) ++kept;
      if (line.rfind("2\t", 0) == 0 && line.find("\tmerged\t") != std::string::npos) ++merged;
      if (line.rfind("3\t", 0) == 0 && line.find("\tdropped\t") != std::string::npos) ++dropped;
    }
    CHECK(kept == kept_printed);
    CHECK(kept - merged == candidates_printed);
    CHECK(candidates_printed - dropped == finals_printed);
  }

  SUBCASE("predictions are fixed six-decimal rows in input order") {
    const std::string pred = dir.file("pred.txt");
    const CliResult predicted = run_cli("predict --model " + model + " --test " + train +
                                            " --schema block=0,label=1 --out " + pred,
                                        dir);
    REQUIRE(predicted.exit_code == 0);
    const std::string text = read_file(pred);
    std::istringstream lines(text);
    std::string line;
    int rows = 0;
    const std::regex fmt("^B\\d{3} \\d+ [01]\\.\\d{6}$");
    while (std::getline(lines, line)) {
      CHECK(std::regex_match(line, fmt));
      ++rows;
    }
    CHECK(rows == 480);
  }

  SUBCASE("eval from predictions equals eval from the model") {
    const std::string pred = dir.file("pred.txt");
    REQUIRE(run_cli("predict --model " + model + " --test " + train +
                        " --schema block=0,label=1 --out " + pred,
                    dir)
                .exit_code == 0);
    const CliResult from_pred = run_cli(
        "eval --test " + train + " --schema block=0,label=1 --pred " + pred, dir);
    const CliResult from_model = run_cli(
        "eval --test " + train + " --schema block=0,label=1 --model " + model, dir);
    REQUIRE(from_pred.exit_code == 0);
    REQUIRE(from_model.exit_code == 0);
    CHECK(from_pred.output == from_model.output);
    CHECK(from_pred.output.find("APR") != std::string::npos);
    CHECK(from_pred.output.find("RKL") != std::string::npos);
    CHECK(from_pred.output.find("TOP1") != std::string::npos);
  }
}

TEST_CASE("training determinism across reruns and jobs") {
  TempDir dir;
  const std::string train = planted_file(dir, "train.txt", 400);
  auto train_once = [&](const std::string& tag, int jobs) {
    const std::string model = dir.file("model_" + tag + ".json");
    const std::string trace = dir.file("trace_" + tag + ".tsv");
    const CliResult result = run_cli(
        "train --train " + train + " --schema block=0,label=1 --metric apr --model " +
            model + " --trace " + trace + " --seed 3 --n-perm 150 --jobs " +
            std::to_string(jobs),
        dir);
    REQUIRE(result.exit_code == 0);
    return read_file(model) + "\x01" + read_file(trace);
  };
  const std::string a = train_once("a", 1);
  const std::string b = train_once("b", 1);
  const std::string c = train_once("c", 4);
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("emm training embeds two independently optimized ensembles") {
  TempDir dir;
  const std::string train = planted_file(dir, "train.txt", 321);
  const std::string model = dir.file("emm.json");
  const CliResult result = run_cli("train --train " + train +
                                       " --schema block=0,label=1 --metric emm --model " +
                                       model + " --seed 5 --n-perm 200 --jobs 2",
                                   dir);
  REQUIRE(result.exit_code == 0);
  const ModelDocument doc = load_model(model);
  REQUIRE(doc.members.size() == 2);
  CHECK(doc.members[0].metric.id == MetricId::APR);
  CHECK(doc.members[1].metric.id == MetricId::RKL);
  CHECK(doc.members[0].metric.alpha == 0.95);
  CHECK(doc.members[1].metric.alpha == 0.05);
  CHECK(!doc.members[0].phalanxes.empty());
  CHECK(!doc.members[1].phalanxes.empty());
  CHECK(result.output.find("APR") != std::string::npos);
  CHECK(result.output.find("RKL") != std::string::npos);
}

TEST_CASE("predicting an unlabeled file and overriding alpha") {
  TempDir dir;
  const std::string train = planted_file(dir, "train.txt", 55);
  const std::string model = dir.file("model.json");
  REQUIRE(run_cli("train --train " + train +
                      " --schema block=0,label=1 --metric apr --alpha 0.9 --model " +
                      model + " --seed 2 --n-perm 200 --jobs 2",
                  dir)
              .exit_code == 0);
  const ModelDocument doc = load_model(model);
  CHECK(doc.members.at(0).metric.alpha == 0.9);

  // Strip the label column to mimic a test file, then score it.
  const auto labeled = load_dataset(train, parse_schema("block=0,label=1"));
  const auto unlabeled = BlockedDataset::make(labeled.features(), std::nullopt,
                                              labeled.block_ids(), std::nullopt);
  const std::string test_file = dir.file("test.txt");
  write_dataset(unlabeled, test_file);
  const std::string pred = dir.file("pred.txt");
  const CliResult result = run_cli(
      "predict --model " + model + " --test " + test_file + " --schema block=0 --out " + pred,
      dir);
  REQUIRE(result.exit_code == 0);
  CHECK(read_file(pred).find("B000 1 ") == 0);
}

TEST_CASE("exit codes") {
  TempDir dir;
  SUBCASE("usage errors exit 1") {
    CHECK(run_cli("train --nonsense", dir).exit_code == 1);
    CHECK(run_cli("blorp", dir).exit_code == 1);
  }
  SUBCASE("missing files and bad data exit 2") {
    CHECK(run_cli("train --train /nonexistent --schema block=0,label=1 --metric apr "
                  "--model " +
                      dir.file("m.json"),
                  dir)
              .exit_code == 2);
    const std::string bad = dir.file("bad.txt");
    write_file(bad, "b1 1 0.5 NaN\n");
    CHECK(run_cli("train --train " + bad + " --schema block=0,label=1 --metric apr "
                  "--model " +
                      dir.file("m.json"),
                  dir)
              .exit_code == 2);
  }
  SUBCASE("alpha with emm is rejected") {
    const std::string train = planted_file(dir, "train.txt", 1);
    CHECK(run_cli("train --train " + train +
                      " --schema block=0,label=1 --metric emm --alpha 0.9 --model " +
                      dir.file("m.json"),
                  dir)
              .exit_code == 2);
  }
}

TEST_CASE("eval handles positive-free blocks per the flag") {
  TempDir dir;
  const std::string data = dir.file("mixed.txt");
  write_file(data,
             "b1 1 0.9\nb1 0 0.4\nb1 0 0.3\n"
             "b2 0 0.8\nb2 0 0.2\n");
  const std::string pred = dir.file("pred.txt");
  write_file(pred,
             "b1 1 0.900000\nb1 2 0.400000\nb1 3 0.300000\n"
             "b2 1 0.800000\nb2 2 0.200000\n");
  const CliResult strict = run_cli(
      "eval --test " + data + " --schema block=0,label=1 --pred " + pred, dir);
  CHECK(strict.exit_code == 2);
  CHECK(strict.output.find("b2") != std::string::npos);

  const CliResult skipping =
      run_cli("eval --test " + data + " --schema block=0,label=1 --pred " + pred +
                  " --skip-empty-blocks",
              dir);
  REQUIRE(skipping.exit_code == 0);
  CHECK(skipping.output.find("APR  1.000000") != std::string::npos);
}

TEST_CASE("eval reproduces the toy single-positive block values") {
  TempDir dir;
  // 1000 cases, one positive at rank 3 of the prediction ordering.
  std::string data, pred;
  for (int i = 0; i < 1000; ++i) {
    const int label = i == 2 ? 1 : 0;
    data += "t1 " + std::to_string(label) + " 0.0\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "t1 %d 0.%06d\n", i + 1, 999999 - i);
    pred += buf;
  }
  const std::string data_path = dir.file("toy.txt");
  const std::string pred_path = dir.file("toy_pred.txt");
  write_file(data_path, data);
  write_file(pred_path, pred);
  const CliResult result = run_cli(
      "eval --test " + data_path + " --schema block=0,label=1 --pred " + pred_path, dir);
  REQUIRE(result.exit_code == 0);
  CHECK(result.output.find("APR  0.333333") != std::string::npos);
  CHECK(result.output.find("RKL  3.000000") != std::string::npos);
  CHECK(result.output.find("TOP1 0.000000") != std::string::npos);

  // Reversed perfect ordering: every positive last.
  std::string reversed;
  for (int i = 0; i < 1000; ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "t1 %d 0.%06d\n", i + 1, i);
    reversed += buf;
  }
  const std::string reversed_path = dir.file("toy_reversed.txt");
  write_file(reversed_path, reversed);
  const CliResult worst = run_cli(
      "eval --test " + data_path + " --schema block=0,label=1 --pred " + reversed_path,
      dir);
  REQUIRE(worst.exit_code == 0);
  CHECK(worst.output.find("TOP1 0.000000") != std::string::npos);
  CHECK(worst.output.find("RKL  998.000000") != std::string::npos);
}

TEST_CASE("per-block eval and hit-curve export") {
  TempDir dir;
  const std::string data = dir.file("threecase.txt");
  write_file(data, "b9 1 0.9\nb9 0 0.5\nb9 0 0.1\n");
  const std::string pred = dir.file("pred.txt");
  write_file(pred, "b9 1 0.900000\nb9 2 0.500000\nb9 3 0.100000\n");
  const std::string curves = dir.file("curves");
  const CliResult result =
      run_cli("eval --test " + data + " --schema block=0,label=1 --pred " + pred +
                  " --per-block --hit-curve-dir " + curves,
              dir);
  REQUIRE(result.exit_code == 0);
  CHECK(result.output.find("b9\t3\t1\t1.000000\t1\t1") != std::string::npos);
  const std::string curve = read_file(curves + "/hits_b9.tsv");
  CHECK(curve == "1\t1\n2\t1\n3\t1\n");
}

TEST_CASE("diagnostics command") {
  TempDir dir;
  const std::string train = planted_file(dir, "train.txt", 77);
  const auto ds = load_dataset(train, parse_schema("block=0,label=1"));
  std::vector<double> probs(static_cast<std::size_t>(ds.n_cases()));
  Rng rng(4);
  for (double& p : probs) p = 0.1 + 0.8 * rng.next_unit();
  const std::string pred = dir.file("pred.txt");
  write_predictions(pred, ds, probs);

  SUBCASE("identical inputs give all ties") {
    const std::string table = dir.file("diag.tsv");
    const CliResult result = run_cli("diagnostics --test " + train +
                                         " --schema block=0,label=1 --pred-a " + pred +
                                         " --pred-b " + pred + " --out " + table,
                                     dir);
    REQUIRE(result.exit_code == 0);
    const std::string text = read_file(table);
    std::istringstream lines(text);
    std::string line;
    int ties = 0, wins = 0;
    while (std::getline(lines, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream fields(line);
      std::string lo, hi;
      int positives, a_wins, tie_count, b_wins;
      fields >> lo >> hi >> positives >> a_wins >> tie_count >> b_wins;
      ties += tie_count;
      wins += a_wins + b_wins;
    }
    CHECK(wins == 0);
    CHECK(ties == ds.n_positives());
  }
  SUBCASE("misaligned prediction files are rejected") {
    const std::string other = dir.file("other.txt");
    write_file(other, "c1 1 0.5\nc1 0 0.25\nc2 1 0.75\nc2 0 0.5\n");
    const CliResult result = run_cli("diagnostics --test " + other +
                                         " --schema block=0,label=1 --pred-a " + pred +
                                         " --pred-b " + pred,
                                     dir);
    CHECK(result.exit_code == 2);
  }
  SUBCASE("per-method hit curves are written") {
    const std::string curves = dir.file("curves");
    const CliResult result = run_cli("diagnostics --test " + train +
                                         " --schema block=0,label=1 --pred-a " + pred +
                                         " --pred-b " + pred + " --hit-curve-dir " + curves,
                                     dir);
    REQUIRE(result.exit_code == 0);
    CHECK(!read_file(curves + "/hits_B000_a.tsv").empty());
    CHECK(!read_file(curves + "/hits_B000_b.tsv").empty());
  }
}
